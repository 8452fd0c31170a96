#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ebsde/errors.hpp"

namespace ebsde {

/// CSV writer with the reproducibility contract: '.' decimals, '\n' line
/// endings, a header row, 17-significant-digit floats, and '#' metadata
/// lines (config digest, seed, grid/scheme parameters, library version).
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& metadata,
              const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw Error(ErrorCode::ConfigError, "cannot open output file '" + path + "'");
        for (const auto& m : metadata) out_ << "# " << m << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    static std::string fmt(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    void begin_row() { first_ = true; }

    void field(double v) { sep() << fmt(v); }
    void field(long v) { sep() << v; }
    void field(int v) { sep() << v; }
    void field(const std::string& v) { sep() << v; }

    void end_row() { out_ << "\n"; }

    template <typename... Ts>
    void row(Ts... vs) {
        begin_row();
        (field(vs), ...);
        end_row();
    }

  private:
    std::ofstream& sep() {
        if (!first_) out_ << ",";
        first_ = false;
        return out_;
    }

    std::ofstream out_;
    bool first_ = true;
};

inline std::string hex_digest(std::uint64_t d) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

}  // namespace ebsde
