#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ebsde/errors.hpp"
#include "ebsde/math.hpp"
#include "ebsde/pde.hpp"

namespace ebsde {

struct RhoTracePoint {
    double rho = 0.0;
    double lambda_rho = 0.0;
    std::vector<std::vector<double>> y;  // gauged against the reference value
};

struct ErgodicDiagnostics {
    bool non_monotone_lambda = false;
    bool richardson_fallback = false;
    double richardson_correction = 0.0;
    double lambda_spread = 0.0;
    double lambda_discount_limit = 0.0;  // extrapolated value before the stationary polish
    double polish_drift = 0.0;
    long polish_steps = 0;
    long discount_steps = 0;
    long clamp_fires_last = 0;
    double sup_z = 0.0;
    double z_bound = std::numeric_limits<double>::infinity();
    bool z_bound_ok = true;
    double max_regime_gap = 0.0;
    double diff_bound = std::numeric_limits<double>::infinity();
    bool diff_bound_ok = true;
    double growth_coeff = 0.0;  // measured C_y in |y| <= C_y (1+|v|)
};

/// Markovian solution of the ergodic system: per-regime profiles in the
/// y(0)=0 gauge (one common additive constant, anchored at the reference
/// regime), their gradients, and the ergodic constant.
struct ErgodicSolution {
    Grid1D grid;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
    double lambda = 0.0;
    int reference_regime = 0;
    std::vector<RhoTracePoint> rho_trace;
    ErgodicDiagnostics diagnostics;
};

namespace detail {

// Intercept of the discount trace at rho = 0: least-squares line through
// the last three points, cross-checked against the two-point elimination.
// Falls back to the smallest-rho value when the two extrapolations
// disagree by more than 10% of the trace spread.
inline double extrapolate_lambda(const std::vector<RhoTracePoint>& trace,
                                 ErgodicDiagnostics& diag) {
    const std::size_t n = trace.size();
    if (n == 1) return trace[0].lambda_rho;
    const auto& a = trace[n - 2];
    const auto& b = trace[n - 1];
    const double two_point =
        (a.rho * b.lambda_rho - b.rho * a.lambda_rho) / (a.rho - b.rho);
    if (n == 2) return two_point;

    std::vector<double> xs, ys;
    double lmin = std::numeric_limits<double>::infinity();
    double lmax = -lmin;
    for (std::size_t k = n - 3; k < n; ++k) {
        xs.push_back(trace[k].rho);
        ys.push_back(trace[k].lambda_rho);
        lmin = std::min(lmin, trace[k].lambda_rho);
        lmax = std::max(lmax, trace[k].lambda_rho);
    }
    const auto fit = fit_line(xs, ys);
    diag.lambda_spread = lmax - lmin;
    diag.richardson_correction = std::fabs(fit.intercept - two_point);
    if (diag.richardson_correction > 0.1 * diag.lambda_spread + 1e-14) {
        diag.richardson_fallback = true;
        return b.lambda_rho;
    }
    return fit.intercept;
}

}  // namespace detail

/// Vanishing-discount construction of the ergodic triplet. Discounted
/// stationary solves along the rho sequence give the trace and the
/// extrapolated constant; a final undiscounted solve with the constant
/// subtracted then relaxes the profile onto the ergodic one (the smallest-rho
/// profile still carries an O(rho) bias) and refines lambda by the measured
/// residual drift rate.
inline ErgodicSolution vanishing_discount(const System1D& sys, const AprioriConstants& apriori,
                                          const std::vector<double>& rho_sequence, double v0,
                                          const SchemeConfig& cfg, int reference_regime = -1) {
    if (rho_sequence.empty())
        throw Error(ErrorCode::ConfigError, "need at least one discount rate", "ergodic.rho_sequence");
    for (std::size_t k = 0; k + 1 < rho_sequence.size(); ++k)
        if (!(rho_sequence[k] > rho_sequence[k + 1]))
            throw Error(ErrorCode::ConfigError, "rho sequence must be strictly decreasing",
                        "ergodic.rho_sequence");
    if (!(rho_sequence.back() > 0.0))
        throw Error(ErrorCode::ConfigError, "discount rates must be positive", "ergodic.rho_sequence");

    const int m0 = sys.rates.m0;
    const int ref = reference_regime < 0 ? m0 - 1 : reference_regime;
    if (ref < 0 || ref >= m0)
        throw Error(ErrorCode::ConfigError, "reference regime out of range", "ergodic.reference_regime");

    ErgodicSolution sol;
    sol.grid = sys.grid;
    sol.reference_regime = ref;

    for (double rho : rho_sequence) {
        auto st = solve_discounted_stationary(sys, rho, cfg);
        RhoTracePoint pt;
        pt.rho = rho;
        const double anchor = sys.grid.interpolate(st.y[static_cast<std::size_t>(ref)], v0);
        pt.lambda_rho = rho * anchor;
        pt.y = std::move(st.y);
        for (auto& yi : pt.y)
            for (auto& v : yi) v -= anchor;
        sol.diagnostics.discount_steps += st.steps;
        sol.diagnostics.clamp_fires_last =
            std::max(sol.diagnostics.clamp_fires_last, st.clamp_fires_last);
        sol.rho_trace.push_back(std::move(pt));
    }

    const std::size_t nt = sol.rho_trace.size();
    if (nt >= 3) {
        const double d1 = std::fabs(sol.rho_trace[nt - 2].lambda_rho - sol.rho_trace[nt - 3].lambda_rho);
        const double d2 = std::fabs(sol.rho_trace[nt - 1].lambda_rho - sol.rho_trace[nt - 2].lambda_rho);
        if (d2 > d1 + 1e-12) sol.diagnostics.non_monotone_lambda = true;
    }
    double lambda = detail::extrapolate_lambda(sol.rho_trace, sol.diagnostics);
    sol.diagnostics.lambda_discount_limit = lambda;

    // stationary polish at rho = 0: the gauged profile converges even if
    // lambda is slightly off; the leftover uniform drift is that offset
    ParabolicStepper polish(sys, 0.0, lambda, cfg);
    auto y = sol.rho_trace.back().y;
    const int n = sys.grid.n;
    StepCounters counters;
    auto prev = y;
    double mean_drift = 0.0;
    bool converged = false;
    for (long s = 0; s < cfg.max_steps; ++s) {
        prev = y;
        polish.step(y, counters);
        ++sol.diagnostics.polish_steps;
        double sum = 0.0;
        for (int i = 0; i < m0; ++i)
            for (int j = 0; j < n; ++j)
                sum += y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                       prev[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        mean_drift = sum / (static_cast<double>(m0) * n * polish.dt());
        double dev = 0.0;
        for (int i = 0; i < m0; ++i)
            for (int j = 0; j < n; ++j) {
                const double d =
                    (y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                     prev[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) /
                        polish.dt() -
                    mean_drift;
                dev = std::max(dev, std::fabs(d));
            }
        if (dev < cfg.stationarity_tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::MaxStepsExceeded, "ergodic polish did not reach a stationary profile");
    sol.diagnostics.polish_drift = mean_drift;
    sol.diagnostics.clamp_fires_last = std::max(sol.diagnostics.clamp_fires_last,
                                                counters.clamp_fires_last);
    sol.lambda = lambda + mean_drift;

    // one common additive gauge: reference regime vanishes at the node nearest 0
    const int j0 = sys.grid.nearest(0.0);
    const double c = y[static_cast<std::size_t>(ref)][static_cast<std::size_t>(j0)];
    for (auto& yi : y)
        for (auto& v : yi) v -= c;
    sol.y = std::move(y);
    for (const auto& yi : sol.y) sol.z.push_back(compute_z(yi, sys.grid, sys.kappa));

    auto& d = sol.diagnostics;
    d.z_bound = apriori.k_z + 1e-3;
    d.diff_bound = apriori.k_diff + 1e-3;
    for (int i = 0; i < m0; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            d.sup_z = std::max(d.sup_z, std::fabs(sol.z[static_cast<std::size_t>(i)][ji]));
            const double yv = sol.y[static_cast<std::size_t>(i)][ji];
            d.growth_coeff = std::max(d.growth_coeff,
                                      std::fabs(yv) / (1.0 + std::fabs(sys.grid.node(j))));
            for (int k = i + 1; k < m0; ++k)
                d.max_regime_gap = std::max(
                    d.max_regime_gap,
                    std::fabs(yv - sol.y[static_cast<std::size_t>(k)][ji]));
        }
    }
    d.z_bound_ok = d.sup_z <= d.z_bound;
    d.diff_bound_ok = m0 == 1 || d.max_regime_gap <= d.diff_bound;
    return sol;
}

/// Slope estimator for the ergodic constant from a long undiscounted run
/// started at zero: (y(T2) - y(T1)) / (T2 - T1), averaged over regimes and
/// a central node window. Rejects horizons whose two-point and three-point
/// slopes disagree.
inline double long_time_lambda(const System1D& sys, double t1, double t2, const SchemeConfig& cfg,
                               double slope_tol = 1e-3) {
    if (!(0.0 < t1 && t1 < t2))
        throw Error(ErrorCode::ConfigError, "need 0 < T1 < T2", "ergodic.horizons");
    const double tm = 0.5 * (t1 + t2);
    std::vector<std::vector<double>> zero(
        static_cast<std::size_t>(sys.rates.m0),
        std::vector<double>(static_cast<std::size_t>(sys.grid.n), 0.0));
    auto sol = solve_finite_horizon(sys, 0.0, 0.0, zero, t2, cfg, {t1, tm, t2});

    const int n = sys.grid.n;
    const int w_lo = (2 * n) / 5, w_hi = (3 * n) / 5;
    auto window_mean = [&](std::size_t t_idx) {
        double s = 0.0;
        long cnt = 0;
        for (const auto& yi : sol.y[t_idx])
            for (int j = w_lo; j <= w_hi; ++j) {
                s += yi[static_cast<std::size_t>(j)];
                ++cnt;
            }
        return s / static_cast<double>(cnt);
    };
    // the three requested times are the last three stored snapshots
    const std::size_t it2 = sol.times.size() - 1;
    const std::size_t itm = it2 - 1;
    const std::size_t it1 = it2 - 2;
    const double m1 = window_mean(it1), mm = window_mean(itm), m2 = window_mean(it2);
    const double slope2 = (m2 - m1) / (sol.times[it2] - sol.times[it1]);
    // the midpoint splits the interval into two sub-slopes; a surviving
    // transient shows up as their disagreement
    const double first_half = (mm - m1) / (sol.times[itm] - sol.times[it1]);
    const double second_half = (m2 - mm) / (sol.times[it2] - sol.times[itm]);
    if (std::fabs(second_half - first_half) > slope_tol)
        throw Error(ErrorCode::HorizonTooShort,
                    "slope estimates over the two half-intervals differ by " +
                        std::to_string(std::fabs(second_half - first_half)));
    return slope2;
}

/// Large-time deviation report: the level L of y(T,v) - lambda T - y(v) and
/// a log-linear fit of how fast the deviation settles there.
struct LargeTimeReport {
    double L = 0.0;
    double k_v_fit = 0.0;
    double c_fit = 0.0;
    double fit_quality = 0.0;
    std::vector<double> horizons;     // snapped horizons, excluding the L-reference
    std::vector<double> delta_y;      // window/regime mean of y(T,.) - lambda T - y(.)
    std::vector<double> residuals;    // |delta_y - L|
    double reference_horizon = 0.0;
    bool residuals_monotone = false;
    bool degenerate = false;          // residuals below the discretization floor; fit skipped
    double noise_floor = 0.0;
    double regime_spread = 0.0;       // max_i |L_i - L|
    double node_spread = 0.0;         // max over window nodes of |L(v) - L|
    double initial_bound = 0.0;       // measured sup |h|
    double initial_lipschitz = 0.0;   // measured Lipschitz constant of h
};

inline LargeTimeReport large_time_report(const System1D& sys, const ErgodicSolution& ergodic,
                                         const std::vector<std::vector<double>>& initial,
                                         std::vector<double> horizons, const SchemeConfig& cfg) {
    if (horizons.size() < 3)
        throw Error(ErrorCode::ConfigError, "need at least three horizons", "ergodic.horizons");
    std::sort(horizons.begin(), horizons.end());

    LargeTimeReport rep;
    for (const auto& hi : initial) {
        for (std::size_t j = 0; j < hi.size(); ++j) {
            if (!std::isfinite(hi[j]))
                throw Error(ErrorCode::ValidationFailure, "initial data must be bounded");
            rep.initial_bound = std::max(rep.initial_bound, std::fabs(hi[j]));
            if (j > 0)
                rep.initial_lipschitz =
                    std::max(rep.initial_lipschitz, std::fabs(hi[j] - hi[j - 1]) / sys.grid.h);
        }
    }

    auto sol = solve_finite_horizon(sys, 0.0, 0.0, initial, horizons.back(), cfg, horizons);
    // keep only the requested horizons (the t=0 snapshot may also be stored)
    std::vector<std::size_t> idx;
    for (double t : horizons) {
        std::size_t best = 0;
        double err = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < sol.times.size(); ++k)
            if (std::fabs(sol.times[k] - t) < err) {
                err = std::fabs(sol.times[k] - t);
                best = k;
            }
        idx.push_back(best);
    }

    const int m0 = sys.rates.m0;
    const int n = sys.grid.n;
    const int w_lo = (2 * n) / 5, w_hi = (3 * n) / 5;
    const double lambda = ergodic.lambda;

    auto delta_mean = [&](std::size_t t_idx, int i) {
        double s = 0.0;
        for (int j = w_lo; j <= w_hi; ++j)
            s += sol.y[t_idx][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                 lambda * sol.times[t_idx] -
                 ergodic.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        return s / static_cast<double>(w_hi - w_lo + 1);
    };

    const std::size_t ref_idx = idx.back();
    rep.reference_horizon = sol.times[ref_idx];
    double l_sum = 0.0;
    std::vector<double> l_regime(static_cast<std::size_t>(m0));
    for (int i = 0; i < m0; ++i) {
        l_regime[static_cast<std::size_t>(i)] = delta_mean(ref_idx, i);
        l_sum += l_regime[static_cast<std::size_t>(i)];
    }
    rep.L = l_sum / m0;
    for (int i = 0; i < m0; ++i) {
        rep.regime_spread = std::max(rep.regime_spread,
                                     std::fabs(l_regime[static_cast<std::size_t>(i)] - rep.L));
        for (int j = w_lo; j <= w_hi; ++j) {
            const double node_l =
                sol.y[ref_idx][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                lambda * rep.reference_horizon -
                ergodic.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            rep.node_spread = std::max(rep.node_spread,
                                       std::fabs(node_l - l_regime[static_cast<std::size_t>(i)]));
        }
    }

    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < m0; ++i) s += delta_mean(idx[k], i);
        s /= m0;
        rep.horizons.push_back(sol.times[idx[k]]);
        rep.delta_y.push_back(s);
        rep.residuals.push_back(std::fabs(s - rep.L));
    }

    rep.residuals_monotone = true;
    for (std::size_t k = 1; k < rep.residuals.size(); ++k)
        if (rep.residuals[k] > rep.residuals[k - 1]) rep.residuals_monotone = false;

    // the finite-horizon flow and the ergodic profile share one grid, so
    // the spatial error cancels in deltaY; what remains is set by the
    // stationarity tolerance of the ergodic solve
    rep.noise_floor = 100.0 * cfg.stationarity_tol;
    double rmax = 0.0;
    for (double r : rep.residuals) rmax = std::max(rmax, r);
    if (rmax < rep.noise_floor) {
        rep.degenerate = true;
        return rep;
    }

    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < rep.residuals.size(); ++k)
        if (rep.residuals[k] > rep.noise_floor) {
            xs.push_back(rep.horizons[k]);
            ys.push_back(std::log(rep.residuals[k]));
        }
    const auto fit = fit_line(xs, ys);
    rep.k_v_fit = -fit.slope;
    rep.c_fit = std::exp(fit.intercept);
    rep.fit_quality = fit.r_squared;
    return rep;
}

}  // namespace ebsde
