#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ebsde/errors.hpp"
#include "ebsde/pde.hpp"
#include "ebsde/rng.hpp"

namespace ebsde {

/// One side of a finite-horizon system: terminal data xi^i, the gradient
/// part F^i(v,z) of the driver, and the coupling part G^i(v, y) (which
/// absorbs any discount term).
struct SystemSide {
    std::function<double(int, double)> xi;
    std::function<double(int, double, double)> F;
    std::function<double(int, double, std::span<const double>)> G;
};

/// A pair of systems to be ordered, with the declared Lipschitz constants
/// and a record of which ordering hypotheses the instance claims:
/// (1) ordered terminal data, (2) Lipschitz drivers, (3) off-diagonal
/// monotone coupling, (4) pointwise driver domination at the dominant
/// solution.
struct ComparisonInstance {
    int m0 = 2;
    double horizon = 1.0;
    SystemSide lower;
    SystemSide upper;
    double lip_f = 0.0;
    double lip_g = 0.0;
    std::array<bool, 4> claims{true, true, true, true};
    std::function<double(double)> eta;
    std::uint64_t seed = 0;
};

enum class ComparisonVerdict { ORDERED, HYPOTHESIS_FAILED, COUNTEREXAMPLE };

struct ComparisonResult {
    ComparisonVerdict verdict = ComparisonVerdict::COUNTEREXAMPLE;
    int failed_condition = 0;  // 1..4 when verdict == HYPOTHESIS_FAILED
    double max_violation = 0.0;
    double max_gap = 0.0;  // sup of upper - lower, informational
};

namespace detail {

inline System1D comparison_system(const ComparisonInstance& inst, const SystemSide& side,
                                  const Grid1D& grid) {
    System1D sys;
    sys.grid = grid;
    RateMatrix rm;  // only the regime count matters; coupling is overridden
    rm.m0 = inst.m0;
    rm.q.assign(static_cast<std::size_t>(inst.m0 * inst.m0), 0.0);
    sys.rates = rm;
    sys.eta = inst.eta;
    sys.kappa = 1.0;
    sys.f = side.F;
    sys.coupling_override = side.G;
    sys.z_feedback_lip = 2.0 * inst.lip_f;
    sys.coupling_lip = inst.lip_g;
    return sys;
}

}  // namespace detail

/// Integrates one side of the instance forward in PDE time from its
/// terminal data, storing regular snapshots.
inline ParabolicSolution solve_small_system(const ComparisonInstance& inst, const SystemSide& side,
                                            const Grid1D& grid, const SchemeConfig& cfg,
                                            long snapshot_stride = 8) {
    auto sys = detail::comparison_system(inst, side, grid);
    std::vector<std::vector<double>> initial;
    for (int i = 0; i < inst.m0; ++i) {
        auto& row = initial.emplace_back(static_cast<std::size_t>(grid.n));
        for (int j = 0; j < grid.n; ++j) row[static_cast<std::size_t>(j)] = side.xi(i, grid.node(j));
    }
    return solve_finite_horizon(sys, 0.0, 0.0, initial, inst.horizon, cfg, {}, snapshot_stride);
}

/// Validates the ordering hypotheses by sampling, then solves both sides
/// and checks the conclusion. Hypothesis (4) is checked along the computed
/// dominant solution only.
inline ComparisonResult check_comparison(const ComparisonInstance& inst, const Grid1D& grid,
                                         const SchemeConfig& cfg) {
    ComparisonResult res;
    const double tol = kSampledTol;

    for (int i = 0; i < inst.m0; ++i)
        for (int j = 0; j < grid.n; ++j)
            if (inst.lower.xi(i, grid.node(j)) > inst.upper.xi(i, grid.node(j)) + tol) {
                res.verdict = ComparisonVerdict::HYPOTHESIS_FAILED;
                res.failed_condition = 1;
                return res;
            }

    const int check_samples = 2000;
    double u[6];
    std::vector<double> ya(static_cast<std::size_t>(inst.m0));
    std::vector<double> yb(static_cast<std::size_t>(inst.m0));
    for (int s = 0; s < check_samples; ++s) {
        halton_point(static_cast<std::uint64_t>(s), 4, u);
        const double v = (2.0 * u[0] - 1.0) * grid.v_max;
        const double z1 = (2.0 * u[1] - 1.0) * 4.0;
        const double z2 = (2.0 * u[2] - 1.0) * 4.0;
        for (int i = 0; i < inst.m0; ++i) {
            halton_point(static_cast<std::uint64_t>(s * inst.m0 + i), 6, u);
            for (int k = 0; k < inst.m0; ++k) {
                ya[static_cast<std::size_t>(k)] = (2.0 * u[k] - 1.0) * 3.0;
                yb[static_cast<std::size_t>(k)] = (2.0 * u[5 - k] - 1.0) * 3.0;
            }
            if (std::fabs(inst.lower.F(i, v, z1) - inst.lower.F(i, v, z2)) >
                inst.lip_f * std::fabs(z1 - z2) + tol) {
                res.verdict = ComparisonVerdict::HYPOTHESIS_FAILED;
                res.failed_condition = 2;
                return res;
            }
            double dy = 0.0;
            for (int k = 0; k < inst.m0; ++k) {
                const double d = ya[static_cast<std::size_t>(k)] - yb[static_cast<std::size_t>(k)];
                dy += d * d;
            }
            dy = std::sqrt(dy);
            if (std::fabs(inst.lower.G(i, v, std::span<const double>(ya)) -
                          inst.lower.G(i, v, std::span<const double>(yb))) >
                inst.lip_g * dy + tol) {
                res.verdict = ComparisonVerdict::HYPOTHESIS_FAILED;
                res.failed_condition = 2;
                return res;
            }
            // off-diagonal monotonicity of the coupling
            for (int k = 0; k < inst.m0; ++k) {
                if (k == i) continue;
                auto bumped = ya;
                bumped[static_cast<std::size_t>(k)] += 0.25;
                if (inst.lower.G(i, v, std::span<const double>(bumped)) <
                    inst.lower.G(i, v, std::span<const double>(ya)) - tol) {
                    res.verdict = ComparisonVerdict::HYPOTHESIS_FAILED;
                    res.failed_condition = 3;
                    return res;
                }
            }
        }
    }

    const long stride = 8;
    auto upper = solve_small_system(inst, inst.upper, grid, cfg, stride);
    for (std::size_t ti = 0; ti < upper.times.size(); ++ti) {
        for (int i = 0; i < inst.m0; ++i)
            for (int j = 0; j < grid.n; ++j) {
                const auto ji = static_cast<std::size_t>(j);
                const double v = grid.node(j);
                const double zb = upper.z[ti][static_cast<std::size_t>(i)][ji];
                for (int k = 0; k < inst.m0; ++k)
                    ya[static_cast<std::size_t>(k)] = upper.y[ti][static_cast<std::size_t>(k)][ji];
                if (inst.lower.F(i, v, zb) > inst.upper.F(i, v, zb) + tol ||
                    inst.lower.G(i, v, std::span<const double>(ya)) >
                        inst.upper.G(i, v, std::span<const double>(ya)) + tol) {
                    res.verdict = ComparisonVerdict::HYPOTHESIS_FAILED;
                    res.failed_condition = 4;
                    return res;
                }
            }
    }

    auto lower = solve_small_system(inst, inst.lower, grid, cfg, stride);
    const double order_tol = 1e-8 + 0.01 * grid.h * grid.h;
    double violation = 0.0, gap = 0.0;
    for (std::size_t ti = 0; ti < lower.times.size(); ++ti)
        for (int i = 0; i < inst.m0; ++i)
            for (int j = 0; j < grid.n; ++j) {
                const double d = lower.y[ti][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                                 upper.y[ti][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                violation = std::max(violation, d);
                gap = std::max(gap, -d);
            }
    res.max_violation = std::max(0.0, violation);
    res.max_gap = gap;
    res.verdict = violation <= order_tol ? ComparisonVerdict::ORDERED
                                         : ComparisonVerdict::COUNTEREXAMPLE;
    return res;
}

/// Seeded random Markovian instance from a fixed family of affine +
/// bounded smooth drivers with monotone tanh coupling; the upper side adds
/// nonnegative gaps, so all four hypotheses hold by construction.
inline ComparisonInstance random_comparison_instance(std::uint64_t seed, int m0 = 2,
                                                     bool break_monotonicity = false) {
    CounterRng rng(seed, 0x636d70ULL);
    ComparisonInstance inst;
    inst.seed = seed;
    inst.m0 = m0;
    inst.horizon = 1.0;
    const double rate = 0.5 + 0.5 * rng.uniform();
    inst.eta = [rate](double v) { return -rate * v; };

    std::vector<double> a(static_cast<std::size_t>(m0)), bb(static_cast<std::size_t>(m0)),
        c(static_cast<std::size_t>(m0)), fgap(static_cast<std::size_t>(m0)),
        r(static_cast<std::size_t>(m0)), ggap(static_cast<std::size_t>(m0)),
        p(static_cast<std::size_t>(m0)), q(static_cast<std::size_t>(m0)),
        xgap(static_cast<std::size_t>(m0));
    std::vector<double> w(static_cast<std::size_t>(m0 * m0), 0.0);
    for (int i = 0; i < m0; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        a[ii] = rng.uniform() - 0.5;
        bb[ii] = 0.6 * (rng.uniform() - 0.5);
        c[ii] = 0.6 * (rng.uniform() - 0.5);
        fgap[ii] = 0.4 * rng.uniform();
        r[ii] = 0.1 + 0.4 * rng.uniform();
        ggap[ii] = 0.3 * rng.uniform();
        p[ii] = rng.uniform() - 0.5;
        q[ii] = 0.6 * (rng.uniform() - 0.5);
        xgap[ii] = 0.5 * rng.uniform();
        for (int k = 0; k < m0; ++k)
            if (k != i) w[static_cast<std::size_t>(i * m0 + k)] = 0.1 + 0.4 * rng.uniform();
    }

    const double flip = break_monotonicity ? -1.0 : 1.0;
    auto g_low = [m0, w, r, flip](int i, double, std::span<const double> y) {
        double s = -r[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        for (int k = 0; k < m0; ++k)
            if (k != i)
                s += w[static_cast<std::size_t>(i * m0 + k)] * flip *
                     std::tanh(y[static_cast<std::size_t>(k)] - y[static_cast<std::size_t>(i)]);
        return s;
    };
    inst.lower.xi = [p, q](int i, double v) {
        return p[static_cast<std::size_t>(i)] + q[static_cast<std::size_t>(i)] * std::tanh(v);
    };
    inst.lower.F = [a, bb, c](int i, double v, double z) {
        return a[static_cast<std::size_t>(i)] + bb[static_cast<std::size_t>(i)] * std::tanh(v) +
               c[static_cast<std::size_t>(i)] * std::sin(z);
    };
    inst.lower.G = g_low;
    inst.upper.xi = [inst_xi = inst.lower.xi, xgap](int i, double v) {
        return inst_xi(i, v) + xgap[static_cast<std::size_t>(i)];
    };
    inst.upper.F = [inst_f = inst.lower.F, fgap](int i, double v, double z) {
        return inst_f(i, v, z) + fgap[static_cast<std::size_t>(i)] * (0.55 + 0.45 * std::tanh(v));
    };
    inst.upper.G = [g_low, ggap](int i, double v, std::span<const double> y) {
        return g_low(i, v, y) + ggap[static_cast<std::size_t>(i)];
    };

    inst.lip_f = 0.35;
    double lg = 0.0;
    for (int i = 0; i < m0; ++i) {
        double s = r[static_cast<std::size_t>(i)];
        for (int k = 0; k < m0; ++k)
            if (k != i) s += 2.0 * w[static_cast<std::size_t>(i * m0 + k)];
        lg = std::max(lg, s);
    }
    inst.lip_g = lg + 0.1;
    inst.claims = {true, true, !break_monotonicity, true};
    return inst;
}

}  // namespace ebsde
