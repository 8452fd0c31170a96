#pragma once

// Independent reference computations for the test suites: closed forms,
// brute-force searches, quadrature. Deliberately slow and simple, and kept
// free of the solver code paths they are used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ebsde/drivers.hpp"
#include "ebsde/errors.hpp"
#include "ebsde/grid.hpp"
#include "ebsde/vec.hpp"

namespace ebsde::oracles {

struct OracleReport {
    std::string name;
    std::string method;  // closed_form | grid_search | finite_difference | ode_quadrature
    double tolerance = 0.0;
    std::uint64_t inputs_digest = 0;
    std::vector<double> reference;
};

inline std::uint64_t fnv1a(const double* data, std::size_t count) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < count * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

/// Max nodal gap between the differenced gradient of y and an analytic z.
inline double fd_gradient_check(const std::vector<double>& y, const Grid1D& g, double kappa,
                                const std::function<double(double)>& analytic_z) {
    const auto z = compute_z(y, g, kappa);
    double err = 0.0;
    for (int j = 0; j < g.n; ++j)
        err = std::max(err, std::fabs(z[static_cast<std::size_t>(j)] - analytic_z(g.node(j))));
    return err;
}

struct SupSearchResult {
    Vec argmax;
    double max = 0.0;
};

namespace detail {

inline bool member(const ConstraintSet& s, const Vec& x) {
    switch (s.kind) {
        case ConstraintSet::Kind::full_space:
            return true;
        case ConstraintSet::Kind::interval:
            return x[0] >= s.lo[0] && x[0] <= s.hi[0];
        case ConstraintSet::Kind::box:
            for (int i = 0; i < x.d; ++i)
                if (x[i] < s.lo[static_cast<std::size_t>(i)] ||
                    x[i] > s.hi[static_cast<std::size_t>(i)])
                    return false;
            return true;
        case ConstraintSet::Kind::subspace_axis:
            for (int i = 0; i < x.d; ++i)
                if (!s.axis_mask[static_cast<std::size_t>(i)] && x[i] != 0.0) return false;
            return true;
    }
    return false;
}

}  // namespace detail

namespace detail {

// per-axis sweep of the set intersected with [-lim, lim], endpoints included
// (a clamped maximizer sits on the set boundary, so it must be a grid point)
inline std::vector<double> axis_points(const ConstraintSet& set, int axis, double lim,
                                       double resolution) {
    double lo = -lim, hi = lim;
    if (set.kind == ConstraintSet::Kind::interval && axis == 0) {
        lo = std::max(lo, set.lo[0]);
        hi = std::min(hi, set.hi[0]);
    } else if (set.kind == ConstraintSet::Kind::box) {
        lo = std::max(lo, set.lo[static_cast<std::size_t>(axis)]);
        hi = std::min(hi, set.hi[static_cast<std::size_t>(axis)]);
    } else if (set.kind == ConstraintSet::Kind::subspace_axis &&
               !set.axis_mask[static_cast<std::size_t>(axis)]) {
        return {0.0};
    }
    std::vector<double> pts;
    for (double x = lo; x < hi; x += resolution) pts.push_back(x);
    pts.push_back(hi);
    return pts;
}

}  // namespace detail

/// Dense grid search of a payoff over the set intersected with [-5,5]^d.
/// The sweep is built directly from the set's own bounds; no projection
/// machinery is involved.
inline SupSearchResult sup_search(const std::function<double(const Vec&)>& payoff,
                                  const ConstraintSet& set, double resolution, int dim) {
    const double lim = 5.0;
    SupSearchResult best;
    best.argmax = Vec::zero(dim);
    best.max = -std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& x) {
        const double p = payoff(x);
        if (p > best.max) {
            best.max = p;
            best.argmax = x;
        }
    };
    const auto xs = detail::axis_points(set, 0, lim, resolution);
    if (dim == 1) {
        for (double x : xs) consider(Vec::scalar(x));
    } else {
        const auto ys = detail::axis_points(set, 1, lim, resolution);
        for (double x : xs)
            for (double y : ys) consider(Vec{{x, y}, 2});
    }
    return best;
}

/// Closed form of the scalar comparison ODE bound Y_t = int_t^m (K_f - rho Y_s) ds.
inline double discounted_ode_bound(double k_f, double rho, double m, double t) {
    if (!(t >= 0.0 && t <= m)) throw Error(ErrorCode::ConfigError, "need 0 <= t <= m");
    return k_f / rho * (1.0 - std::exp(-rho * (m - t)));
}

/// RK4 quadrature of the same ODE, for cross-checking the closed form.
inline double discounted_ode_bound_quadrature(double k_f, double rho, double m, double t,
                                              int steps = 4000) {
    double y = 0.0;  // terminal condition at s = m, integrated backward
    const double h = (m - t) / steps;
    auto rhs = [&](double yy) { return k_f - rho * yy; };
    for (int k = 0; k < steps; ++k) {
        const double k1 = rhs(y);
        const double k2 = rhs(y + 0.5 * h * k1);
        const double k3 = rhs(y + 0.5 * h * k2);
        const double k4 = rhs(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

/// Matrix exponential exp(Q t) of a small rate matrix by scaling and
/// squaring with a Taylor kernel; reference for chain marginal laws.
inline std::vector<double> expm_small(const std::vector<double>& q, int m0, double t) {
    std::vector<double> a(q.size());
    double max_abs = 0.0;
    for (double v : q) max_abs = std::max(max_abs, std::fabs(v * t));
    int squarings = 0;
    double scale = 1.0;
    while (max_abs * scale > 0.5) {
        scale *= 0.5;
        ++squarings;
    }
    for (std::size_t k = 0; k < q.size(); ++k) a[k] = q[k] * t * scale;

    const auto n = static_cast<std::size_t>(m0);
    std::vector<double> result(n * n, 0.0), term(n * n, 0.0), tmp(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) result[i * n + i] = term[i * n + i] = 1.0;
    for (int order = 1; order <= 18; ++order) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += term[i * n + k] * a[k * n + j];
                tmp[i * n + j] = s / order;
            }
        term = tmp;
        for (std::size_t k = 0; k < n * n; ++k) result[k] += term[k];
    }
    for (int sq = 0; sq < squarings; ++sq) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += result[i * n + k] * result[k * n + j];
                tmp[i * n + j] = s;
            }
        result = tmp;
    }
    return result;
}

}  // namespace ebsde::oracles
