#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace ebsde {

/// Standard normal CDF through erfc. Smoothness matters here: the grid
/// benchmarks difference this function, so a low-order rational
/// approximation would leak its error into second differences.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

/// Scaled complementary error function e^{x^2} erfc(x), stable for the
/// moderate arguments used here (|x| < 25).
inline double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x > 25.0) {
        // asymptotic tail, avoids exp overflow
        const double ix2 = 1.0 / (x * x);
        return (1.0 - 0.5 * ix2 * (1.0 - 1.5 * ix2)) / (x * 1.7724538509055160273);
    }
    return std::exp(x * x) * std::erfc(x);
}

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1,1] (positive half; symmetric).
inline constexpr double gl16_x[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr double gl16_w[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

}  // namespace detail

/// Composite 16-point Gauss-Legendre quadrature of f on [a,b] with the
/// given number of equal panels.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                             int panels = 8) {
    if (a == b) return 0.0;
    const double hp = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * hp;
        const double half = 0.5 * hp;
        double s = 0.0;
        for (int k = 0; k < 8; ++k) {
            const double dx = half * detail::gl16_x[k];
            s += detail::gl16_w[k] * (f(mid + dx) + f(mid - dx));
        }
        total += s * half;
    }
    return total;
}

/// Order-fixed pairwise summation; result is independent of how the work
/// producing `values` was split across threads.
inline double pairwise_sum(const std::vector<double>& values, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += values[i];
        return s;
    }
    const std::size_t mid = lo + n / 2;
    return pairwise_sum(values, lo, mid) + pairwise_sum(values, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum(values, 0, values.size());
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    double sd = 0.0;
};

/// Mean with standard error, reduced in a thread-count independent order.
inline MeanStderr mean_stderr(const std::vector<double>& values) {
    MeanStderr r;
    const auto n = values.size();
    if (n == 0) return r;
    r.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return r;
    std::vector<double> dev2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - r.mean;
        dev2[i] = d * d;
    }
    const double var = pairwise_sum(dev2) / static_cast<double>(n - 1);
    r.sd = std::sqrt(var);
    r.stderr_ = r.sd / std::sqrt(static_cast<double>(n));
    return r;
}

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};

/// Least-squares line y = intercept + slope*x.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f;
    const auto n = x.size();
    if (n < 2) {
        f.intercept = n == 1 ? y[0] : 0.0;
        return f;
    }
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

}  // namespace ebsde
