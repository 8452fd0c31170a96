#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ebsde/errors.hpp"

namespace ebsde {

/// Uniform one-dimensional grid.
struct Grid1D {
    double v_min = -6.0;
    double v_max = 6.0;
    int n = 801;
    double h = 0.015;

    Grid1D() = default;
    Grid1D(double a, double b, int nodes) : v_min(a), v_max(b), n(nodes) {
        if (!(a < b)) throw Error(ErrorCode::ConfigError, "grid needs v_min < v_max", "grid");
        if (nodes < 3) throw Error(ErrorCode::ConfigError, "grid needs at least 3 nodes", "grid.n");
        h = (b - a) / (nodes - 1);
    }

    double node(int j) const { return v_min + j * h; }

    int nearest(double v) const {
        const int j = static_cast<int>(std::lround((v - v_min) / h));
        return std::clamp(j, 0, n - 1);
    }

    /// Linear interpolation of nodal values; clamps outside the domain and
    /// reports the clamp through `clamped` when provided.
    double interpolate(const std::vector<double>& values, double v, bool* clamped = nullptr) const {
        if (v <= v_min || v >= v_max) {
            if (clamped && (v < v_min || v > v_max)) *clamped = true;
            return v <= v_min ? values.front() : values.back();
        }
        const double s = (v - v_min) / h;
        const int j = std::min(static_cast<int>(s), n - 2);
        const double w = s - j;
        return (1.0 - w) * values[static_cast<std::size_t>(j)] +
               w * values[static_cast<std::size_t>(j + 1)];
    }
};

/// kappa^T * gradient by central differences, second-order one-sided at the
/// two boundary nodes. Exact for affine nodal data.
inline std::vector<double> compute_z(const std::vector<double>& y, const Grid1D& g,
                                     double kappa = 1.0) {
    const int n = g.n;
    std::vector<double> z(static_cast<std::size_t>(n));
    const double ih2 = kappa / (2.0 * g.h);
    z[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) * ih2;
    for (int j = 1; j + 1 < n; ++j)
        z[static_cast<std::size_t>(j)] =
            (y[static_cast<std::size_t>(j + 1)] - y[static_cast<std::size_t>(j - 1)]) * ih2;
    z[static_cast<std::size_t>(n - 1)] =
        (3.0 * y[static_cast<std::size_t>(n - 1)] - 4.0 * y[static_cast<std::size_t>(n - 2)] +
         y[static_cast<std::size_t>(n - 3)]) *
        ih2;
    return z;
}

}  // namespace ebsde
