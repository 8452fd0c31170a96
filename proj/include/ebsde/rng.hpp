#pragma once

#include <cmath>
#include <cstdint>

namespace ebsde {

namespace detail {

inline void philox_round(std::uint64_t& c0, std::uint64_t& c1, std::uint64_t key) {
    constexpr std::uint64_t mult = 0xD2B74407B1CE6E93ULL;
    const unsigned __int128 prod = static_cast<unsigned __int128>(mult) * c0;
    const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
    const std::uint64_t lo = static_cast<std::uint64_t>(prod);
    c0 = hi ^ key ^ c1;
    c1 = lo;
}

}  // namespace detail

/// Philox-2x64-10 counter-based generator. A stream is addressed by
/// (seed, stream_id); advancing only bumps the counter, so streams for
/// different paths never overlap and adding paths does not reshuffle
/// existing ones.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream_id)
        : key_(seed), stream_(stream_id) {}

    std::uint64_t next_u64() {
        if (have_second_) {
            have_second_ = false;
            return second_;
        }
        std::uint64_t c0 = counter_++;
        std::uint64_t c1 = stream_;
        std::uint64_t key = key_;
        constexpr std::uint64_t weyl = 0x9E3779B97F4A7C15ULL;
        for (int r = 0; r < 10; ++r) {
            detail::philox_round(c0, c1, key);
            key += weyl;
        }
        second_ = c1;
        have_second_ = true;
        return c0;
    }

    /// Uniform on the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

    /// Exponential with the given rate (rate > 0).
    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    std::uint64_t key_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t second_ = 0;
    bool have_second_ = false;
    bool have_normal_ = false;
    double cached_normal_ = 0.0;
};

/// Halton low-discrepancy point in [0,1)^dim (dim <= 6), used by the
/// sampled-assumption validators so the checks are deterministic.
inline void halton_point(std::uint64_t index, int dim, double* out) {
    static constexpr int bases[6] = {2, 3, 5, 7, 11, 13};
    for (int k = 0; k < dim; ++k) {
        const int b = bases[k];
        double f = 1.0, x = 0.0;
        std::uint64_t i = index + 1;
        while (i > 0) {
            f /= b;
            x += f * static_cast<double>(i % static_cast<std::uint64_t>(b));
            i /= static_cast<std::uint64_t>(b);
        }
        out[k] = x;
    }
}

}  // namespace ebsde
