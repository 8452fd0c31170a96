#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ebsde/errors.hpp"
#include "ebsde/rng.hpp"
#include "ebsde/vec.hpp"

namespace ebsde {

inline constexpr double kLinearTol = 1e-12;   // exact linear constraints
inline constexpr double kSampledTol = 1e-10;  // slack for sampled nonlinear inequalities

/// Sampling box and count for the executable model-assumption checks. The
/// conditions quantify over all of R^d, so they are spot-checked on a
/// deterministic quasi-random sample instead.
struct ValidationConfig {
    double v_box = 6.0;
    double z_box = 5.0;
    int samples = 10000;
};

/// Transition-rate matrix of the regime chain, with the extreme rates used
/// by the a priori difference bound.
struct RateMatrix {
    int m0 = 1;
    std::vector<double> q;  // row-major m0 x m0
    double q_min = std::numeric_limits<double>::infinity();  // min off-diagonal
    double q_max = 0.0;                                      // max entry
    bool irreducible = false;

    double rate(int i, int k) const { return q[static_cast<std::size_t>(i * m0 + k)]; }
};

/// Validates row sums, off-diagonal signs, and computes q_min/q_max.
/// A single regime is accepted; its q_min is flagged +inf / non-irreducible.
inline RateMatrix validate_rate_matrix(const std::vector<std::vector<double>>& rows,
                                       const std::string& path = "rates") {
    const int m0 = static_cast<int>(rows.size());
    if (m0 < 1) throw Error(ErrorCode::ConfigError, "rate matrix needs at least one regime", path);
    RateMatrix rm;
    rm.m0 = m0;
    rm.q.assign(static_cast<std::size_t>(m0 * m0), 0.0);
    for (int i = 0; i < m0; ++i) {
        if (static_cast<int>(rows[i].size()) != m0)
            throw Error(ErrorCode::ConfigError, "rate matrix must be square", path + "[" + std::to_string(i) + "]");
        double row_sum = 0.0;
        for (int k = 0; k < m0; ++k) {
            const double v = rows[i][k];
            if (!std::isfinite(v))
                throw Error(ErrorCode::ConfigError, "non-finite rate entry", path + "[" + std::to_string(i) + "]");
            rm.q[static_cast<std::size_t>(i * m0 + k)] = v;
            row_sum += v;
            if (i != k && v < 0.0)
                throw Error(ErrorCode::NegativeOffDiagonal, "off-diagonal rate must be nonnegative",
                            path + "[" + std::to_string(i) + "]");
        }
        if (std::fabs(row_sum) > kLinearTol)
            throw Error(ErrorCode::RowSumViolation,
                        "row sum " + std::to_string(row_sum) + " exceeds tolerance",
                        path + "[" + std::to_string(i) + "]");
    }
    double qmin = std::numeric_limits<double>::infinity();
    double qmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m0; ++i)
        for (int k = 0; k < m0; ++k) {
            qmax = std::max(qmax, rm.rate(i, k));
            if (i != k) qmin = std::min(qmin, rm.rate(i, k));
        }
    rm.q_max = m0 == 1 ? 0.0 : qmax;
    rm.q_min = qmin;  // +inf when m0 == 1
    rm.irreducible = m0 > 1 && qmin > 0.0;
    return rm;
}

/// Drift/volatility of the stochastic factor together with its declared
/// dissipativity constant.
struct FactorModel {
    int dim = 1;
    std::function<Vec(const Vec&)> eta;
    Mat2 kappa = Mat2::identity(1);
    double c_eta = 0.0;  // dissipativity constant, must exceed the driver's C_v
};

/// Family of regime drivers with declared growth/Lipschitz constants.
struct DriverSet {
    int m0 = 1;
    std::function<double(int, const Vec&, const Vec&)> f;
    double c_v = 0.0;
    double c_z = 0.0;
    double k_f = 0.0;
};

namespace detail {

inline Vec box_point(const double* u, int dim, double half_width) {
    Vec p = Vec::zero(dim);
    for (int i = 0; i < dim; ++i) p[i] = (2.0 * u[i] - 1.0) * half_width;
    return p;
}

}  // namespace detail

/// Spot-checks |kappa|=1, positive definiteness, and the sampled
/// dissipativity inequality against the declared constants.
inline void validate_factor(const FactorModel& fm, double c_v, const ValidationConfig& vc = {},
                            const std::string& path = "factor") {
    if (fm.dim != 1 && fm.dim != 2)
        throw Error(ErrorCode::ConfigError, "state dimension must be 1 or 2", path + ".d");
    if (std::fabs(fm.kappa.frobenius_norm() - 1.0) > kLinearTol)
        throw Error(ErrorCode::ValidationFailure, "kappa must be normalized to unit Frobenius norm",
                    path + ".kappa");
    // positive definiteness for d<=2: positive diagonal + positive determinant
    if (fm.kappa(0, 0) <= 0.0 ||
        (fm.dim == 2 &&
         (fm.kappa(1, 1) <= 0.0 ||
          fm.kappa(0, 0) * fm.kappa(1, 1) -
                  0.25 * (fm.kappa(0, 1) + fm.kappa(1, 0)) * (fm.kappa(0, 1) + fm.kappa(1, 0)) <=
              0.0)))
        throw Error(ErrorCode::ValidationFailure, "kappa must be positive definite", path + ".kappa");
    if (!(fm.c_eta > c_v))
        throw Error(ErrorCode::DegenerateDissipativity,
                    "dissipativity constant must strictly exceed the driver's C_v", path + ".C_eta");
    double u[4];
    for (int s = 0; s < vc.samples; ++s) {
        halton_point(static_cast<std::uint64_t>(s), 2 * fm.dim, u);
        const Vec v = detail::box_point(u, fm.dim, vc.v_box);
        const Vec vb = detail::box_point(u + fm.dim, fm.dim, vc.v_box);
        const Vec dv = v - vb;
        const double lhs = dot(fm.eta(v) - fm.eta(vb), dv);
        if (lhs > -fm.c_eta * dot(dv, dv) + kSampledTol)
            throw Error(ErrorCode::ValidationFailure,
                        "sampled dissipativity check failed at sample " + std::to_string(s),
                        path + ".eta");
    }
}

/// Spot-checks the driver growth and Lipschitz declarations on a
/// quasi-random sample of (v, v', z, z') tuples.
inline void validate_driver(const DriverSet& ds, int dim, const ValidationConfig& vc = {},
                            const std::string& path = "driver") {
    double u[6];
    for (int i = 0; i < ds.m0; ++i) {
        for (int s = 0; s < vc.samples; ++s) {
            halton_point(static_cast<std::uint64_t>(s), 3 * dim, u);
            const Vec v = detail::box_point(u, dim, vc.v_box);
            const Vec vb = detail::box_point(u + dim, dim, vc.v_box);
            const Vec z = detail::box_point(u + 2 * dim, dim, vc.z_box);
            const Vec zb = detail::box_point(u + dim, dim, vc.z_box);  // reuse second block
            const Vec zero = Vec::zero(dim);

            if (std::fabs(ds.f(i, v, zero)) > ds.k_f + kSampledTol)
                throw Error(ErrorCode::ValidationFailure,
                            "sampled |f(v,0)| exceeds declared K_f at sample " + std::to_string(s),
                            path + ".K_f");
            const double dfv = std::fabs(ds.f(i, v, z) - ds.f(i, vb, z));
            if (dfv > ds.c_v * (1.0 + norm(z)) * norm(v - vb) + kSampledTol)
                throw Error(ErrorCode::ValidationFailure,
                            "sampled v-Lipschitz check failed at sample " + std::to_string(s),
                            path + ".C_v");
            const double dfz = std::fabs(ds.f(i, v, z) - ds.f(i, v, zb));
            if (dfz > ds.c_z * (1.0 + norm(z) + norm(zb)) * norm(z - zb) + kSampledTol)
                throw Error(ErrorCode::ValidationFailure,
                            "sampled z-Lipschitz check failed at sample " + std::to_string(s),
                            path + ".C_z");
        }
    }
}

/// Bounds guaranteed for the discounted system and its regime differences.
/// k_y is only defined for rho > 0; k_diff is finite only for irreducible chains.
struct AprioriConstants {
    std::optional<double> k_y;
    double k_z = 0.0;
    double k_diff = std::numeric_limits<double>::infinity();
    double rho = 0.0;
};

inline AprioriConstants apriori_constants(const DriverSet& ds, const FactorModel& fm,
                                          const RateMatrix& rm, double rho) {
    if (!(fm.c_eta > ds.c_v))
        throw Error(ErrorCode::DegenerateDissipativity, "C_eta must strictly exceed C_v");
    if (rho < 0.0) throw Error(ErrorCode::ConfigError, "discount rate must be nonnegative");
    AprioriConstants a;
    a.rho = rho;
    if (rho > 0.0) a.k_y = ds.k_f / rho;
    const double gap = fm.c_eta - ds.c_v;
    a.k_z = ds.c_v / gap;
    if (rm.irreducible)
        a.k_diff = (ds.k_f + ds.c_v * fm.c_eta * ds.c_z / (gap * gap)) / rm.q_min;
    return a;
}

/// K_y accessor that signals a zero-discount request explicitly.
inline double bounded_k_y(const AprioriConstants& a) {
    if (!a.k_y) throw Error(ErrorCode::ZeroDiscount, "K_y requested with rho = 0");
    return *a.k_y;
}

/// Clamp map for candidate solutions: max{-K, min{y, K}}.
inline double truncate_scalar(double y, double k_y) {
    return std::max(-k_y, std::min(y, k_y));
}

/// Radial clamp preserving direction: |q(z)| = min{|z|, K_z}, q(0) = 0.
inline Vec truncate_vector(const Vec& z, double k_z) {
    const double n = norm(z);
    if (n == 0.0 || n <= k_z) return z;
    return (k_z / n) * z;
}

}  // namespace ebsde
