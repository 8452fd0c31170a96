#pragma once

#include <stdexcept>
#include <string>

namespace ebsde {

/// Machine-readable error codes surfaced through exceptions and CLI exit codes.
enum class ErrorCode {
    RowSumViolation,
    NegativeOffDiagonal,
    DegenerateDissipativity,
    ZeroDiscount,
    ValidationFailure,
    NonFiniteState,
    MaxStepsExceeded,
    HorizonTooShort,
    DegenerateFit,
    StepTooLarge,
    InconclusiveBias,
    ConfigError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::RowSumViolation: return "RowSumViolation";
        case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
        case ErrorCode::DegenerateDissipativity: return "DegenerateDissipativity";
        case ErrorCode::ZeroDiscount: return "ZeroDiscount";
        case ErrorCode::ValidationFailure: return "ValidationFailure";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
        case ErrorCode::HorizonTooShort: return "HorizonTooShort";
        case ErrorCode::DegenerateFit: return "DegenerateFit";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::InconclusiveBias: return "InconclusiveBias";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Exception carrying a code plus the config field path that caused it (when known).
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string message, std::string path = {})
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message +
                             (path.empty() ? "" : " [at " + path + "]")),
          code_(code),
          path_(std::move(path)) {}

    ErrorCode code() const { return code_; }
    const std::string& path() const { return path_; }

  private:
    ErrorCode code_;
    std::string path_;
};

}  // namespace ebsde
