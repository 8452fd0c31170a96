#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ebsde/errors.hpp"
#include "ebsde/grid.hpp"
#include "ebsde/model.hpp"

namespace ebsde {

/// Time-stepping controls for the semilinear parabolic system.
struct SchemeConfig {
    enum class Boundary { linear_extrapolation, clamped_gradient };

    double dt = 0.0;            // 0: largest step allowed by the stability bound
    double theta_scheme = 1.0;  // implicitness weight for the diffusion operator, in [0.5,1]
    Boundary boundary = Boundary::linear_extrapolation;
    double stationarity_tol = 1e-8;  // on sup |y_{n+1}-y_n| / dt
    long max_steps = 40000000;
};

/// One-dimensional Markovian system: factor drift, unit-norm volatility,
/// regime drivers, and the inter-regime coupling. The default coupling is
/// sum_k q^{ik} (e^{y^k-y^i} - 1) with the exponent argument clamped; a
/// custom coupling (used by the comparison harness) replaces it wholesale,
/// including any discount term.
struct System1D {
    Grid1D grid;
    RateMatrix rates;
    std::function<double(double)> eta;
    double kappa = 1.0;
    std::function<double(int, double, double)> f;  // f^i(v, z)

    double coupling_clamp = std::numeric_limits<double>::infinity();
    double z_feedback_lip = 0.0;  // 2 C_z (1 + 2 K_z)
    double coupling_lip = 0.0;    // Lipschitz of the explicit coupling in y^i
    double grad_bound = std::numeric_limits<double>::infinity();  // for clamped-gradient boundary

    // (i, v, y at node across regimes) -> coupling value; empty = default
    std::function<double(int, double, std::span<const double>)> coupling_override;
};

/// Assembles the solver-facing system from validated model pieces (d = 1).
inline System1D make_system(const Grid1D& grid, const FactorModel& fm, const RateMatrix& rm,
                            const DriverSet& ds, const AprioriConstants& apriori) {
    if (fm.dim != 1)
        throw Error(ErrorCode::ConfigError, "the PDE path supports spatial dimension 1 only");
    System1D sys;
    sys.grid = grid;
    sys.rates = rm;
    sys.eta = [fm](double v) { return fm.eta(Vec::scalar(v))[0]; };
    sys.kappa = fm.kappa(0, 0);
    sys.f = [ds](int i, double v, double z) { return ds.f(i, Vec::scalar(v), Vec::scalar(z)); };
    sys.z_feedback_lip = 2.0 * ds.c_z * (1.0 + 2.0 * apriori.k_z);
    sys.grad_bound = apriori.k_z;
    if (rm.m0 > 1) {
        if (!std::isfinite(apriori.k_diff))
            throw Error(ErrorCode::ConfigError,
                        "multi-regime solves need an irreducible rate matrix (finite K_diff)");
        sys.coupling_clamp = apriori.k_diff + 1.0;
        double max_out = 0.0;
        for (int i = 0; i < rm.m0; ++i) max_out = std::max(max_out, -rm.rate(i, i));
        sys.coupling_lip = max_out * std::exp(sys.coupling_clamp);
    }
    return sys;
}

/// The recorded explicit-stability bound on dt.
inline double stability_dt(const System1D& sys) {
    double eta_max = 0.0;
    for (int j = 0; j < sys.grid.n; ++j)
        eta_max = std::max(eta_max, std::fabs(sys.eta(sys.grid.node(j))));
    const double denom = eta_max + sys.z_feedback_lip;
    double dt = denom > 0.0 ? sys.grid.h / denom : std::numeric_limits<double>::infinity();
    return dt;
}

struct StepCounters {
    long clamp_fires = 0;       // coupling clamp activations, cumulative
    long clamp_fires_last = 0;  // activations during the latest step
};

/// One IMEX step of
///   dy^i/dt = 1/2 kappa^2 y'' + eta y' + f^i(v, kappa y') + coupling - rho y - lambda_shift.
/// Diffusion, drift, and the rho term go through a tridiagonal theta-solve
/// (drift centered, falling back to one-sided where |eta| h exceeds the
/// monotone limit); the Hamiltonian uses the lagged gradient and the
/// coupling the previous iterate.
class ParabolicStepper {
  public:
    ParabolicStepper(const System1D& sys, double rho, double lambda_shift, SchemeConfig cfg)
        : sys_(sys), rho_(rho), lambda_shift_(lambda_shift), cfg_(cfg) {
        const auto& g = sys_.grid;
        if (cfg_.theta_scheme < 0.5 || cfg_.theta_scheme > 1.0)
            throw Error(ErrorCode::ConfigError, "theta_scheme must lie in [0.5,1]", "scheme.theta_scheme");
        eta_.resize(static_cast<std::size_t>(g.n));
        for (int j = 0; j < g.n; ++j) eta_[static_cast<std::size_t>(j)] = sys_.eta(g.node(j));
        if (eta_.front() < 0.0 || eta_.back() > 0.0)
            throw Error(ErrorCode::ConfigError,
                        "factor drift must point into the domain at both boundaries");
        dt_ = resolve_dt();
        build_operator();
        factorize();
        rhs_.resize(static_cast<std::size_t>(g.n));
        znode_.resize(static_cast<std::size_t>(g.n));
        ynode_.resize(static_cast<std::size_t>(sys_.rates.m0));
        ynew_.assign(static_cast<std::size_t>(sys_.rates.m0),
                     std::vector<double>(static_cast<std::size_t>(g.n), 0.0));
    }

    double dt() const { return dt_; }

    /// Advances the state one step; returns sup |change| / dt.
    double step(std::vector<std::vector<double>>& y, StepCounters& counters) {
        const auto& g = sys_.grid;
        const int m0 = sys_.rates.m0;
        const int n = g.n;
        counters.clamp_fires_last = 0;
        double max_rate = 0.0;

        for (int i = 0; i < m0; ++i) {
            const auto& yi = y[static_cast<std::size_t>(i)];
            const auto zi = compute_z(yi, g, sys_.kappa);
            for (int j = 0; j < n; ++j) {
                const auto ji = static_cast<std::size_t>(j);
                const double v = g.node(j);
                for (int k = 0; k < m0; ++k)
                    ynode_[static_cast<std::size_t>(k)] = y[static_cast<std::size_t>(k)][ji];
                double expl = sys_.f(i, v, zi[ji]) + coupling(i, v, counters) - lambda_shift_;
                double rhs = yi[ji] + dt_ * expl;
                if (one_minus_theta_ > 0.0) rhs += one_minus_theta_ * dt_ * apply_operator(yi, j);
                rhs_[ji] = rhs;
            }
            if (cfg_.boundary == SchemeConfig::Boundary::clamped_gradient) {
                const double s_lo = truncate_scalar((yi[1] - yi[0]) / g.h, sys_.grad_bound);
                const double s_hi = truncate_scalar(
                    (yi[static_cast<std::size_t>(n - 1)] - yi[static_cast<std::size_t>(n - 2)]) / g.h,
                    sys_.grad_bound);
                rhs_[0] = -g.h * s_lo;
                rhs_[static_cast<std::size_t>(n - 1)] = g.h * s_hi;
            }
            thomas_solve(ynew_[static_cast<std::size_t>(i)]);
        }

        for (int i = 0; i < m0; ++i) {
            auto& yi = y[static_cast<std::size_t>(i)];
            auto& yn = ynew_[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) {
                const auto ji = static_cast<std::size_t>(j);
                const double d = yn[ji] - yi[ji];
                if (!std::isfinite(yn[ji]))
                    throw Error(ErrorCode::NonFiniteState,
                                "state became non-finite; reduce dt or check the model");
                max_rate = std::max(max_rate, std::fabs(d));
                yi[ji] = yn[ji];
            }
        }
        counters.clamp_fires += counters.clamp_fires_last;
        return max_rate / dt_;
    }

  private:
    double resolve_dt() const {
        double dt = stability_dt(sys_);
        // explicit coupling and any explicit diffusion fraction stay monotone
        const double expl_lip = sys_.coupling_lip + (1.0 - cfg_.theta_scheme) * rho_;
        if (expl_lip > 0.0) dt = std::min(dt, 0.9 / expl_lip);
        if (cfg_.theta_scheme < 1.0) {
            const double diff = 0.5 * sys_.kappa * sys_.kappa;
            dt = std::min(dt, 0.9 * sys_.grid.h * sys_.grid.h /
                                  (2.0 * diff * (1.0 - cfg_.theta_scheme)));
        }
        if (cfg_.dt > 0.0) dt = std::min(dt, cfg_.dt);
        return dt;
    }

    // Spatial operator L y = diff y'' + eta y' - rho y with the boundary
    // closure (zero curvature, one-sided drift) folded in.
    void build_operator() {
        const auto& g = sys_.grid;
        const int n = g.n;
        const double diff = 0.5 * sys_.kappa * sys_.kappa;
        lo_.assign(static_cast<std::size_t>(n), 0.0);
        di_.assign(static_cast<std::size_t>(n), 0.0);
        up_.assign(static_cast<std::size_t>(n), 0.0);
        for (int j = 1; j + 1 < n; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            const double e = eta_[ji];
            double a = diff / (g.h * g.h) - e / (2.0 * g.h);
            double c = diff / (g.h * g.h) + e / (2.0 * g.h);
            if (a < 0.0 || c < 0.0) {  // cell-Peclet fallback to one-sided drift
                a = diff / (g.h * g.h) + std::max(0.0, -e) / g.h;
                c = diff / (g.h * g.h) + std::max(0.0, e) / g.h;
            }
            lo_[ji] = a;
            up_[ji] = c;
            di_[ji] = -(a + c) - rho_;
        }
        di_[0] = -eta_[0] / g.h - rho_;
        up_[0] = eta_[0] / g.h;
        const auto last = static_cast<std::size_t>(n - 1);
        di_[last] = eta_[last] / g.h - rho_;
        lo_[last] = -eta_[last] / g.h;
    }

    double apply_operator(const std::vector<double>& y, int j) const {
        const auto ji = static_cast<std::size_t>(j);
        double r = di_[ji] * y[ji];
        if (j > 0) r += lo_[ji] * y[ji - 1];
        if (j + 1 < sys_.grid.n) r += up_[ji] * y[ji + 1];
        return r;
    }

    // Factorization of (I - theta dt L); rows are rewritten for the
    // clamped-gradient boundary, which pins the one-sided slope instead.
    void factorize() {
        const int n = sys_.grid.n;
        one_minus_theta_ = 1.0 - cfg_.theta_scheme;
        const double th = cfg_.theta_scheme;
        ma_.assign(static_cast<std::size_t>(n), 0.0);
        mb_.assign(static_cast<std::size_t>(n), 0.0);
        mc_.assign(static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            ma_[ji] = -th * dt_ * lo_[ji];
            mb_[ji] = 1.0 - th * dt_ * di_[ji];
            mc_[ji] = -th * dt_ * up_[ji];
        }
        if (cfg_.boundary == SchemeConfig::Boundary::clamped_gradient) {
            const auto last = static_cast<std::size_t>(n - 1);
            mb_[0] = 1.0;
            mc_[0] = -1.0;
            ma_[last] = -1.0;
            mb_[last] = 1.0;
        }
        cp_.assign(static_cast<std::size_t>(n), 0.0);
        dn_.assign(static_cast<std::size_t>(n), 0.0);
        cp_[0] = mc_[0] / mb_[0];
        dn_[0] = 1.0 / mb_[0];
        for (int j = 1; j < n; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            const double den = mb_[ji] - ma_[ji] * cp_[ji - 1];
            cp_[ji] = mc_[ji] / den;
            dn_[ji] = 1.0 / den;
        }
    }

    void thomas_solve(std::vector<double>& out) {
        const int n = sys_.grid.n;
        scratch_.resize(static_cast<std::size_t>(n));
        scratch_[0] = rhs_[0] * dn_[0];
        for (int j = 1; j < n; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            scratch_[ji] = (rhs_[ji] - ma_[ji] * scratch_[ji - 1]) * dn_[ji];
        }
        out[static_cast<std::size_t>(n - 1)] = scratch_[static_cast<std::size_t>(n - 1)];
        for (int j = n - 2; j >= 0; --j) {
            const auto ji = static_cast<std::size_t>(j);
            out[ji] = scratch_[ji] - cp_[ji] * out[ji + 1];
        }
    }

    double coupling(int i, double v, StepCounters& counters) {
        if (sys_.coupling_override)
            return sys_.coupling_override(i, v, std::span<const double>(ynode_));
        const int m0 = sys_.rates.m0;
        if (m0 == 1) return 0.0;
        double s = 0.0;
        const double yi = ynode_[static_cast<std::size_t>(i)];
        for (int k = 0; k < m0; ++k) {
            if (k == i) continue;
            double d = ynode_[static_cast<std::size_t>(k)] - yi;
            if (std::fabs(d) > sys_.coupling_clamp) {
                d = truncate_scalar(d, sys_.coupling_clamp);
                ++counters.clamp_fires_last;
            }
            s += sys_.rates.rate(i, k) * (std::exp(d) - 1.0);
        }
        return s;
    }

    System1D sys_;
    double rho_;
    double lambda_shift_;
    SchemeConfig cfg_;
    double dt_ = 0.0;
    double one_minus_theta_ = 0.0;
    std::vector<double> eta_;
    std::vector<double> lo_, di_, up_;      // spatial operator
    std::vector<double> ma_, mb_, mc_;      // implicit matrix
    std::vector<double> cp_, dn_;           // Thomas factorization
    std::vector<double> rhs_, scratch_, znode_, ynode_;
    std::vector<std::vector<double>> ynew_;
};

/// Time-indexed solution grids; z rows are kappa^T central differences of y.
struct ParabolicSolution {
    Grid1D grid;
    std::vector<double> times;
    std::vector<std::vector<std::vector<double>>> y;  // [time][regime][node]
    std::vector<std::vector<std::vector<double>>> z;
    double dt_used = 0.0;
    long clamp_fires = 0;
};

/// Integrates the system forward in PDE time from the given initial data,
/// storing snapshots at the requested times (snapped to the step grid).
/// snapshot_stride > 0 additionally stores every stride-th step.
inline ParabolicSolution solve_finite_horizon(const System1D& sys, double rho, double lambda_shift,
                                              const std::vector<std::vector<double>>& initial,
                                              double T, const SchemeConfig& cfg,
                                              std::vector<double> snapshot_times = {},
                                              long snapshot_stride = 0) {
    if (!(T > 0.0)) throw Error(ErrorCode::ConfigError, "horizon must be positive");
    ParabolicStepper stepper(sys, rho, lambda_shift, cfg);
    const long n_steps = std::max<long>(1, static_cast<long>(std::ceil(T / stepper.dt() - 1e-12)));
    SchemeConfig exact = cfg;
    exact.dt = T / static_cast<double>(n_steps);
    ParabolicStepper run(sys, rho, lambda_shift, exact);

    std::vector<long> snap_steps;
    if (snapshot_times.empty() && snapshot_stride == 0) snapshot_times = {0.0, T};
    for (double t : snapshot_times)
        snap_steps.push_back(std::clamp<long>(std::lround(t / run.dt()), 0, n_steps));
    if (snapshot_stride > 0)
        for (long s = 0; s <= n_steps; s += snapshot_stride) snap_steps.push_back(s);
    snap_steps.push_back(n_steps);
    std::sort(snap_steps.begin(), snap_steps.end());
    snap_steps.erase(std::unique(snap_steps.begin(), snap_steps.end()), snap_steps.end());

    ParabolicSolution sol;
    sol.grid = sys.grid;
    sol.dt_used = run.dt();
    auto y = initial;
    StepCounters counters;
    std::size_t next_snap = 0;
    auto store = [&](long step_index) {
        sol.times.push_back(step_index * run.dt());
        sol.y.push_back(y);
        auto& zt = sol.z.emplace_back();
        for (const auto& yi : y) zt.push_back(compute_z(yi, sys.grid, sys.kappa));
    };
    for (long s = 0; s <= n_steps; ++s) {
        if (next_snap < snap_steps.size() && snap_steps[next_snap] == s) {
            store(s);
            ++next_snap;
        }
        if (s < n_steps) run.step(y, counters);
    }
    sol.clamp_fires = counters.clamp_fires;
    return sol;
}

struct StationaryResult {
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
    long steps = 0;
    double residual = 0.0;        // sup |change| / dt at the final step
    long clamp_fires_last = 0;    // coupling clamp activations at convergence
    double dt_used = 0.0;
};

/// Runs the discounted system from y = 0 to its stationary point; the
/// stopping rule is the sup-norm time derivative estimate.
inline StationaryResult solve_discounted_stationary(const System1D& sys, double rho,
                                                    const SchemeConfig& cfg) {
    if (!(rho > 0.0)) throw Error(ErrorCode::ZeroDiscount, "discounted solve needs rho > 0");
    ParabolicStepper stepper(sys, rho, 0.0, cfg);
    StationaryResult r;
    r.dt_used = stepper.dt();
    r.y.assign(static_cast<std::size_t>(sys.rates.m0),
               std::vector<double>(static_cast<std::size_t>(sys.grid.n), 0.0));
    StepCounters counters;
    for (long s = 0; s < cfg.max_steps; ++s) {
        const double rate = stepper.step(r.y, counters);
        ++r.steps;
        if (rate < cfg.stationarity_tol) {
            r.residual = rate;
            r.clamp_fires_last = counters.clamp_fires_last;
            for (const auto& yi : r.y) r.z.push_back(compute_z(yi, sys.grid, sys.kappa));
            return r;
        }
        r.residual = rate;
    }
    throw Error(ErrorCode::MaxStepsExceeded,
                "no stationary point within " + std::to_string(cfg.max_steps) +
                    " steps; residual " + std::to_string(r.residual));
}

}  // namespace ebsde
