#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ebsde/drivers.hpp"
#include "ebsde/ergodic.hpp"
#include "ebsde/errors.hpp"
#include "ebsde/math.hpp"
#include "ebsde/model.hpp"
#include "ebsde/rng.hpp"

namespace ebsde {

/// Regime-switching market: factor dynamics, chain rates, the
/// forward-performance driver data, and initial conditions. sigma_bound
/// records the declared bound on the asset volatility matrix; strategies
/// are already volatility-rescaled, so sigma enters only through this
/// admissibility record.
struct MarketSpec {
    FactorModel factor;
    RateMatrix rates;
    ForwardPerformanceDriver driver;
    double sigma_bound = 1.0;
    double x0 = 1.0;
    int i0 = 0;  // zero-based initial regime
    Vec v0 = Vec::scalar(0.0);
};

inline void validate_market(const MarketSpec& m) {
    if (!(m.x0 > 0.0)) throw Error(ErrorCode::ConfigError, "initial wealth must be positive", "mc.x0");
    if (m.i0 < 0 || m.i0 >= m.rates.m0)
        throw Error(ErrorCode::ConfigError, "initial regime out of range", "mc.i0");
    check_fp_driver(m.driver);
    if (!(m.sigma_bound > 0.0))
        throw Error(ErrorCode::ConfigError, "volatility bound must be positive", "market.sigma_bound");
}

/// Trading rule fed to the simulator; custom values are projected onto the
/// regime's constraint set before use.
struct Strategy {
    enum class Kind { zero, optimal, custom };
    Kind kind = Kind::zero;
    std::function<Vec(int, const Vec&, const Vec&)> custom;  // (regime, v, z) -> pi
    double pi_bound = -1.0;  // <0: measured at setup

    static Strategy zero() { return {}; }
    static Strategy optimal() {
        Strategy s;
        s.kind = Kind::optimal;
        return s;
    }
    static Strategy custom_fn(std::function<Vec(int, const Vec&, const Vec&)> fn) {
        Strategy s;
        s.kind = Kind::custom;
        s.custom = std::move(fn);
        return s;
    }
};

/// Optimal rule shifted by a constant in every coordinate (then projected):
/// a strictly suboptimal control with a driver gap bounded away from zero.
inline Strategy perturbed_optimal_strategy(const ForwardPerformanceDriver& drv, double shift) {
    return Strategy::custom_fn([drv, shift](int i, const Vec& v, const Vec& z) {
        Vec pi = optimal_strategy(drv, i, v, z);
        for (int k = 0; k < pi.d; ++k) pi[k] += shift;
        return pi;
    });
}

/// Simulated trajectories at the requested record times plus the exact
/// chain jump log. Identical (seed, n_paths, n_steps) reproduce the bundle
/// bit for bit regardless of thread count.
struct PathBundle {
    std::uint64_t seed = 0;
    int n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    double horizon = 0.0;
    std::vector<double> record_times;              // snapped to the step grid
    std::vector<std::vector<Vec>> factor;          // [record][path]
    std::vector<std::vector<double>> wealth;       // [record][path]
    std::vector<std::vector<int>> regime;          // [record][path]
    struct Jump {
        double t;
        int from;
        int to;
    };
    std::vector<std::vector<Jump>> jumps;          // [path]
    double positivity_dt_threshold = 0.0;
    double pi_bound = 0.0;
};

namespace detail {

inline double measure_pi_bound(const MarketSpec& spec, const Strategy& strategy,
                               const ErgodicSolution* ergodic) {
    if (strategy.kind == Strategy::Kind::zero) return 0.0;
    if (strategy.pi_bound >= 0.0) return strategy.pi_bound;
    double zmax = 0.0;
    if (ergodic)
        for (const auto& zi : ergodic->z)
            for (double z : zi) zmax = std::max(zmax, std::fabs(z));
    if (strategy.kind == Strategy::Kind::optimal) {
        double r0 = 0.0;
        for (const auto& s : spec.driver.constraints) {
            Vec origin = Vec::zero(2);
            origin.d = 2;
            r0 = std::max(r0, norm(project(s, origin)));
        }
        return (zmax + spec.driver.theta_bound) / (1.0 - spec.driver.delta) + r0;
    }
    // custom: sample over the factor range and the gradient range seen on the grid
    double bound = 0.0;
    const double vspan = ergodic ? std::max(std::fabs(ergodic->grid.v_min), ergodic->grid.v_max) : 6.0;
    for (int i = 0; i < spec.rates.m0; ++i)
        for (int jv = 0; jv <= 60; ++jv)
            for (int jz = -2; jz <= 2; ++jz) {
                Vec v = Vec::zero(spec.factor.dim);
                v[0] = -vspan + jv * (2.0 * vspan / 60.0);
                Vec z = Vec::zero(spec.factor.dim);
                z[0] = jz * 0.5 * zmax;
                const Vec pi =
                    project(spec.driver.constraints[static_cast<std::size_t>(i)],
                            strategy.custom(i, v, z));
                bound = std::max(bound, norm(pi));
            }
    return bound;
}

}  // namespace detail

/// Euler-Maruyama factor, exact exponential jump clocks for the chain
/// (coefficients frozen at the left endpoint of each substep), and
/// log-Euler wealth so positivity is structural. The same Brownian
/// increment drives factor and wealth.
inline PathBundle simulate_paths(const MarketSpec& spec, const Strategy& strategy,
                                 const ErgodicSolution* ergodic, double T, int n_paths,
                                 int n_steps, std::uint64_t seed,
                                 std::vector<double> record_times = {}, int n_threads = 1) {
    validate_market(spec);
    if (n_paths < 1 || n_steps < 1)
        throw Error(ErrorCode::ConfigError, "need positive path and step counts", "mc");
    if (strategy.kind == Strategy::Kind::optimal && !ergodic)
        throw Error(ErrorCode::ConfigError, "optimal strategy needs an ergodic solution", "mc.strategy");
    if (ergodic && spec.factor.dim != 1)
        throw Error(ErrorCode::ConfigError,
                    "gradient lookup from the solver grid supports d = 1 only", "mc");

    PathBundle b;
    b.seed = seed;
    b.n_paths = n_paths;
    b.n_steps = n_steps;
    b.horizon = T;
    b.dt = T / n_steps;
    b.pi_bound = detail::measure_pi_bound(spec, strategy, ergodic);
    b.positivity_dt_threshold =
        b.pi_bound > 0.0
            ? 1.0 / ((b.pi_bound * (spec.driver.theta_bound + 3.0)) *
                     (b.pi_bound * (spec.driver.theta_bound + 3.0)))
            : std::numeric_limits<double>::infinity();
    if (b.dt >= b.positivity_dt_threshold)
        throw Error(ErrorCode::StepTooLarge,
                    "dt " + std::to_string(b.dt) + " exceeds the positivity threshold " +
                        std::to_string(b.positivity_dt_threshold));

    if (record_times.empty()) record_times = {0.0, T};
    std::vector<long> record_steps;
    for (double t : record_times)
        record_steps.push_back(std::clamp<long>(std::lround(t / b.dt), 0, n_steps));
    std::sort(record_steps.begin(), record_steps.end());
    record_steps.erase(std::unique(record_steps.begin(), record_steps.end()), record_steps.end());
    for (long s : record_steps) b.record_times.push_back(s * b.dt);

    const auto n_rec = record_steps.size();
    b.factor.assign(n_rec, std::vector<Vec>(static_cast<std::size_t>(n_paths)));
    b.wealth.assign(n_rec, std::vector<double>(static_cast<std::size_t>(n_paths)));
    b.regime.assign(n_rec, std::vector<int>(static_cast<std::size_t>(n_paths)));
    b.jumps.assign(static_cast<std::size_t>(n_paths), {});

    const int dim = spec.factor.dim;
    const int m0 = spec.rates.m0;
    const double sqdt = std::sqrt(b.dt);

    auto run_path = [&](int p) {
        CounterRng rng(seed, static_cast<std::uint64_t>(p));
        Vec v = spec.v0;
        double log_x = std::log(spec.x0);
        int regime = spec.i0;
        double next_jump = std::numeric_limits<double>::infinity();
        const double out0 = -spec.rates.rate(regime, regime);
        if (m0 > 1 && out0 > 0.0) next_jump = rng.exponential(out0);

        std::size_t rec = 0;
        auto maybe_record = [&](long step_index) {
            while (rec < record_steps.size() && record_steps[rec] == step_index) {
                b.factor[rec][static_cast<std::size_t>(p)] = v;
                b.wealth[rec][static_cast<std::size_t>(p)] = std::exp(log_x);
                b.regime[rec][static_cast<std::size_t>(p)] = regime;
                ++rec;
            }
        };

        for (long k = 0; k < n_steps; ++k) {
            maybe_record(k);
            const double t_next = (k + 1) * b.dt;
            const int i_use = regime;  // left-endpoint regime for the coefficients

            while (next_jump <= t_next) {
                const double out = -spec.rates.rate(regime, regime);
                const double u = rng.uniform();
                double acc = 0.0;
                int target = regime;
                for (int kk = 0; kk < m0; ++kk) {
                    if (kk == regime) continue;
                    acc += spec.rates.rate(regime, kk) / out;
                    if (u <= acc) {
                        target = kk;
                        break;
                    }
                }
                if (target == regime) target = (regime + 1) % m0;  // numerical tail of u
                b.jumps[static_cast<std::size_t>(p)].push_back({next_jump, regime, target});
                regime = target;
                const double out_new = -spec.rates.rate(regime, regime);
                next_jump = out_new > 0.0 ? next_jump + rng.exponential(out_new)
                                          : std::numeric_limits<double>::infinity();
            }

            Vec xi = Vec::zero(dim);
            for (int c = 0; c < dim; ++c) xi[c] = rng.normal();

            Vec z = Vec::zero(dim);
            if (ergodic)
                z[0] = ergodic->grid.interpolate(ergodic->z[static_cast<std::size_t>(i_use)], v[0]);
            Vec pi = Vec::zero(dim);
            switch (strategy.kind) {
                case Strategy::Kind::zero:
                    break;
                case Strategy::Kind::optimal:
                    pi = optimal_strategy(spec.driver, i_use, v, z);
                    break;
                case Strategy::Kind::custom:
                    pi = project(spec.driver.constraints[static_cast<std::size_t>(i_use)],
                                 strategy.custom(i_use, v, z));
                    break;
            }
            const Vec th = spec.driver.theta(i_use, v);
            log_x += dot(pi, th) * b.dt - 0.5 * dot(pi, pi) * b.dt + sqdt * dot(pi, xi);
            v = v + b.dt * spec.factor.eta(v) + sqdt * mat_vec(spec.factor.kappa, xi);
        }
        maybe_record(n_steps);
    };

    const int workers = std::max(1, n_threads);
    if (workers == 1) {
        for (int p = 0; p < n_paths; ++p) run_path(p);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_paths + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int lo = w * chunk, hi = std::min(n_paths, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (int p = lo; p < hi; ++p) run_path(p);
            });
        }
        for (auto& t : pool) t.join();
    }
    return b;
}

/// Forward performance value U^i(x,t) = (x^delta / delta) e^{y^i(v) - lambda t}.
/// Factor values outside the solver grid clamp to its edge; the clamp is counted.
inline double eval_forward_performance(const ErgodicSolution& ergodic, double x, double t, int i,
                                       double v, double delta, long* out_of_grid_count = nullptr) {
    if (!(x > 0.0)) throw Error(ErrorCode::ConfigError, "wealth must be positive");
    bool clamped = false;
    const double y = ergodic.grid.interpolate(ergodic.y[static_cast<std::size_t>(i)], v, &clamped);
    if (clamped && out_of_grid_count) ++(*out_of_grid_count);
    return std::pow(x, delta) / delta * std::exp(y - ergodic.lambda * t);
}

enum class MartingaleVerdict { MARTINGALE_CONSISTENT, SUPERMARTINGALE_CONSISTENT, VIOLATION };

inline const char* verdict_name(MartingaleVerdict v) {
    switch (v) {
        case MartingaleVerdict::MARTINGALE_CONSISTENT: return "MARTINGALE_CONSISTENT";
        case MartingaleVerdict::SUPERMARTINGALE_CONSISTENT: return "SUPERMARTINGALE_CONSISTENT";
        case MartingaleVerdict::VIOLATION: return "VIOLATION";
    }
    return "VIOLATION";
}

/// Discretization allowance for the paired test: c1 dt + c2 h^2, with the
/// constants calibrated once on a single-regime market where the
/// martingale identity is exact in continuous time.
struct MartingaleBudget {
    double c1 = 2.0;
    double c2 = 4.0;
    double value(double dt, double h) const { return c1 * dt + c2 * h * h; }
};

struct MartingaleReport {
    double t = 0.0;
    double s = 0.0;
    double delta = 0.0;    // E[U_s] - E[U_t], paired
    double stderr_ = 0.0;
    double bias_budget = 0.0;
    MartingaleVerdict verdict = MartingaleVerdict::VIOLATION;
    bool inconclusive_bias = false;
    long out_of_grid = 0;
    double dt = 0.0;
};

/// Paired two-time test of the (super)martingale property of U along the
/// simulated wealth paths.
inline MartingaleReport martingale_test(const MarketSpec& spec, const ErgodicSolution& ergodic,
                                        const Strategy& strategy, double t, double s, int n_paths,
                                        int n_steps, std::uint64_t seed,
                                        const MartingaleBudget& budget = {}, int n_threads = 1) {
    if (!(0.0 <= t && t < s))
        throw Error(ErrorCode::ConfigError, "need 0 <= t < s", "mc.times");
    auto bundle = simulate_paths(spec, strategy, &ergodic, s, n_paths, n_steps, seed, {t, s},
                                 n_threads);
    const std::size_t rt = bundle.record_times.size() - 2;
    const std::size_t rs = bundle.record_times.size() - 1;

    MartingaleReport rep;
    rep.t = bundle.record_times[rt];
    rep.s = bundle.record_times[rs];
    rep.dt = bundle.dt;
    std::vector<double> diff(static_cast<std::size_t>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        const auto pi = static_cast<std::size_t>(p);
        const double ut = eval_forward_performance(ergodic, bundle.wealth[rt][pi], rep.t,
                                                   bundle.regime[rt][pi], bundle.factor[rt][pi][0],
                                                   spec.driver.delta, &rep.out_of_grid);
        const double us = eval_forward_performance(ergodic, bundle.wealth[rs][pi], rep.s,
                                                   bundle.regime[rs][pi], bundle.factor[rs][pi][0],
                                                   spec.driver.delta, &rep.out_of_grid);
        diff[pi] = us - ut;
    }
    const auto ms = mean_stderr(diff);
    rep.delta = ms.mean;
    rep.stderr_ = ms.stderr_;
    rep.bias_budget = budget.value(bundle.dt, ergodic.grid.h);
    rep.inconclusive_bias = rep.bias_budget > 5.0 * rep.stderr_;

    const double allowance = 3.0 * rep.stderr_ + rep.bias_budget;
    if (strategy.kind == Strategy::Kind::optimal)
        rep.verdict = std::fabs(rep.delta) <= allowance ? MartingaleVerdict::MARTINGALE_CONSISTENT
                                                        : MartingaleVerdict::VIOLATION;
    else
        rep.verdict = rep.delta <= allowance ? MartingaleVerdict::SUPERMARTINGALE_CONSISTENT
                                             : MartingaleVerdict::VIOLATION;
    return rep;
}

struct GrowthRateReport {
    double horizon = 0.0;
    double estimate = 0.0;  // (1/T) ln mean (X_T^delta / delta)
    double stderr_ = 0.0;   // delta-method
    bool heavy_tail = false;
    double top_share = 0.0;  // fraction of the mean carried by the top 1% of paths
};

/// Long-horizon risk-sensitive growth estimate of the terminal power utility.
inline GrowthRateReport risk_sensitive_growth_rate(const MarketSpec& spec,
                                                   const ErgodicSolution& ergodic,
                                                   const Strategy& strategy, double T, int n_paths,
                                                   int n_steps, std::uint64_t seed,
                                                   int n_threads = 1) {
    auto bundle = simulate_paths(spec, strategy, &ergodic, T, n_paths, n_steps, seed, {T},
                                 n_threads);
    const std::size_t rT = bundle.record_times.size() - 1;
    std::vector<double> w(static_cast<std::size_t>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        const auto pi = static_cast<std::size_t>(p);
        w[pi] = std::pow(bundle.wealth[rT][pi], spec.driver.delta) / spec.driver.delta;
    }
    const auto ms = mean_stderr(w);
    GrowthRateReport rep;
    rep.horizon = T;
    rep.estimate = std::log(ms.mean) / T;
    rep.stderr_ = ms.stderr_ / (ms.mean * T);

    auto sorted = w;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const auto top = std::max<std::size_t>(1, sorted.size() / 100);
    double top_sum = 0.0;
    for (std::size_t k = 0; k < top; ++k) top_sum += sorted[k];
    rep.top_share = top_sum / (ms.mean * static_cast<double>(n_paths));
    rep.heavy_tail = rep.top_share > 0.5;
    return rep;
}

/// Running cost of the risk-sensitive control problem.
inline double cost_functional(const ForwardPerformanceDriver& drv, int i, const Vec& v,
                              const Vec& pi) {
    const Vec th = drv.theta(i, v);
    return 0.5 * drv.delta * (drv.delta - 1.0) * dot(pi, pi) + drv.delta * dot(pi, th);
}

}  // namespace ebsde
