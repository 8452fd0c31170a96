#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebsde/drivers.hpp"
#include "ebsde/errors.hpp"
#include "ebsde/mc.hpp"
#include "ebsde/model.hpp"
#include "ebsde/pde.hpp"
#include "ebsde/version.hpp"

namespace ebsde {

using nlohmann::json;

namespace detail {

inline const json& require_field(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw Error(ErrorCode::ConfigError, "missing required field", path + "." + key);
    return *it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

}  // namespace detail

/// Monte Carlo block of an experiment.
struct McConfig {
    double horizon = 1.0;
    int n_paths = 10000;
    int n_steps = 128;
    std::uint64_t seed = 1;
    std::string strategy = "optimal";  // optimal | zero | perturbed
    double perturbation = 0.2;
    double x0 = 1.0;
    int i0 = 0;  // zero-based
    double v0 = 0.0;
    double t = 0.0;
    double s = 1.0;
    std::vector<double> record_times;
};

/// Fully validated experiment: model pieces, grids, scheme, and the blocks
/// the subcommands draw from.
struct Experiment {
    FactorModel factor;
    RateMatrix rates;
    DriverSet driver_set;
    AprioriConstants apriori;  // at rho = 0 (K_y is per-solve)
    std::optional<ForwardPerformanceDriver> fp_driver;
    std::optional<ClosedFormBenchmark> benchmark;

    Grid1D grid;
    SchemeConfig scheme;

    std::vector<double> rho_sequence{0.1, 0.05, 0.025, 0.0125};
    double v0 = 0.0;
    int reference_regime = -1;  // -1: last
    double t1 = 10.0;
    double t2 = 20.0;
    std::vector<double> horizons;
    bool ergodic_inline = true;
    std::string initial_kind = "zero";  // zero | ergodic

    McConfig mc;
    int thin_paths = 0;

    json raw;
    std::uint64_t digest = 0;
};

namespace detail {

inline std::uint64_t digest_of(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::function<Vec(const Vec&)> make_eta(const json& j, int dim, const std::string& path) {
    const std::string kind = require_field(j, "kind", path).get<std::string>();
    if (kind == "ou") {
        const double rate = require_field(j, "rate", path).get<double>();
        if (!(rate > 0.0)) throw Error(ErrorCode::ConfigError, "ou rate must be positive", path);
        return [rate, dim](const Vec& v) {
            Vec r = Vec::zero(dim);
            for (int i = 0; i < dim; ++i) r[i] = -rate * v[i];
            return r;
        };
    }
    if (kind == "ou_plus_tanh") {
        const double rate = require_field(j, "rate", path).get<double>();
        const double amp = require_field(j, "amp", path).get<double>();
        if (!(rate > std::fabs(amp)))
            throw Error(ErrorCode::ConfigError, "ou_plus_tanh needs rate > |amp|", path);
        return [rate, amp, dim](const Vec& v) {
            Vec r = Vec::zero(dim);
            for (int i = 0; i < dim; ++i) r[i] = -rate * v[i] + amp * std::tanh(v[i]);
            return r;
        };
    }
    throw Error(ErrorCode::ConfigError, "unknown drift kind '" + kind + "'", path + ".kind");
}

inline std::function<Vec(int, const Vec&)> make_theta(const json& arr, int m0, int dim,
                                                      double& bound, double& lip,
                                                      const std::string& path) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != m0)
        throw Error(ErrorCode::ConfigError, "need one theta entry per regime", path);
    struct Entry {
        double base;
        double amp;
    };
    std::vector<Entry> entries;
    bound = 0.0;
    lip = 0.0;
    for (int i = 0; i < m0; ++i) {
        const auto& e = arr[static_cast<std::size_t>(i)];
        const std::string epath = path + "[" + std::to_string(i) + "]";
        const std::string kind = require_field(e, "kind", epath).get<std::string>();
        Entry entry{0.0, 0.0};
        entry.base = require_field(e, "base", epath).get<double>();
        if (kind == "tanh")
            entry.amp = require_field(e, "amp", epath).get<double>();
        else if (kind != "const")
            throw Error(ErrorCode::ConfigError, "unknown theta kind '" + kind + "'", epath);
        bound = std::max(bound, std::fabs(entry.base) + std::fabs(entry.amp));
        lip = std::max(lip, std::fabs(entry.amp));
        entries.push_back(entry);
    }
    return [entries, dim](int i, const Vec& v) {
        Vec r = Vec::zero(dim);
        r[0] = entries[static_cast<std::size_t>(i)].base +
               entries[static_cast<std::size_t>(i)].amp * std::tanh(v[0]);
        return r;
    };
}

inline ConstraintSet make_constraint(const json& j, const std::string& path) {
    const std::string kind = require_field(j, "kind", path).get<std::string>();
    if (kind == "full_space") return ConstraintSet::full_space();
    if (kind == "interval")
        return ConstraintSet::interval(require_field(j, "lo", path).get<double>(),
                                       require_field(j, "hi", path).get<double>());
    if (kind == "box") {
        const auto lo = require_field(j, "lo", path).get<std::vector<double>>();
        const auto hi = require_field(j, "hi", path).get<std::vector<double>>();
        if (lo.size() != 2 || hi.size() != 2)
            throw Error(ErrorCode::ConfigError, "box bounds need two entries", path);
        return ConstraintSet::box({lo[0], lo[1]}, {hi[0], hi[1]});
    }
    if (kind == "subspace_axis") {
        const auto mask = require_field(j, "mask", path).get<std::vector<bool>>();
        if (mask.size() != 2)
            throw Error(ErrorCode::ConfigError, "axis mask needs two entries", path);
        return ConstraintSet::subspace({mask[0], mask[1]});
    }
    throw Error(ErrorCode::ConfigError, "unknown constraint kind '" + kind + "'", path + ".kind");
}

}  // namespace detail

/// Parses and fully validates an experiment document. Throws Error with a
/// field path on any violation.
inline Experiment parse_experiment(const json& root) {
    Experiment ex;
    ex.raw = root;
    ex.digest = detail::digest_of(root);

    const auto& model = detail::require_field(root, "model", "$");
    const auto& driver = detail::require_field(model, "driver", "model");
    const std::string kind = detail::require_field(driver, "kind", "model.driver").get<std::string>();

    const auto& grid_j = detail::require_field(root, "grid", "$");
    ex.grid = Grid1D(detail::get_or(grid_j, "v_min", -6.0), detail::get_or(grid_j, "v_max", 6.0),
                     detail::get_or(grid_j, "n", 801));

    if (root.contains("scheme")) {
        const auto& s = root["scheme"];
        ex.scheme.dt = detail::get_or(s, "dt", 0.0);
        ex.scheme.theta_scheme = detail::get_or(s, "theta_scheme", 1.0);
        ex.scheme.stationarity_tol = detail::get_or(s, "stationarity_tol", 1e-8);
        ex.scheme.max_steps = detail::get_or<long>(s, "max_steps", 40000000L);
        const std::string b = detail::get_or<std::string>(s, "boundary", "linear_extrapolation");
        if (b == "linear_extrapolation")
            ex.scheme.boundary = SchemeConfig::Boundary::linear_extrapolation;
        else if (b == "clamped_gradient")
            ex.scheme.boundary = SchemeConfig::Boundary::clamped_gradient;
        else
            throw Error(ErrorCode::ConfigError, "unknown boundary rule '" + b + "'", "scheme.boundary");
    }

    ValidationConfig vc;
    vc.v_box = std::max(std::fabs(ex.grid.v_min), std::fabs(ex.grid.v_max));
    if (root.contains("validation")) {
        const auto& v = root["validation"];
        vc.v_box = detail::get_or(v, "v_box", vc.v_box);
        vc.z_box = detail::get_or(v, "z_box", vc.z_box);
        vc.samples = detail::get_or(v, "samples", vc.samples);
    }

    if (kind == "benchmark1" || kind == "benchmark2") {
        ClosedFormBenchmark b;
        b.variant = kind == "benchmark1" ? ClosedFormBenchmark::Variant::example1
                                         : ClosedFormBenchmark::Variant::example2;
        ex.benchmark = b;
        ex.factor = benchmark_factor();
        ex.rates = validate_rate_matrix({{0.0}}, "model.rates");
        ex.driver_set = benchmark_driver_set(b);
    } else {
        const auto& factor_j = detail::require_field(model, "factor", "model");
        ex.factor.dim = detail::get_or(factor_j, "d", 1);
        ex.factor.c_eta = detail::require_field(factor_j, "C_eta", "model.factor").get<double>();
        ex.factor.eta = detail::make_eta(detail::require_field(factor_j, "eta", "model.factor"),
                                         ex.factor.dim, "model.factor.eta");
        if (factor_j.contains("kappa")) {
            const auto rows = factor_j["kappa"].get<std::vector<std::vector<double>>>();
            if (static_cast<int>(rows.size()) != ex.factor.dim)
                throw Error(ErrorCode::ConfigError, "kappa must be d x d", "model.factor.kappa");
            ex.factor.kappa = Mat2::identity(ex.factor.dim);
            for (int i = 0; i < ex.factor.dim; ++i)
                for (int j = 0; j < ex.factor.dim; ++j)
                    ex.factor.kappa(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        } else {
            ex.factor.kappa = Mat2::identity(ex.factor.dim);
            if (ex.factor.dim == 2) {
                const double s = 1.0 / std::sqrt(2.0);
                ex.factor.kappa(0, 0) = ex.factor.kappa(1, 1) = s;
            }
        }

        const auto rates_rows =
            detail::require_field(model, "rates", "model").get<std::vector<std::vector<double>>>();
        ex.rates = validate_rate_matrix(rates_rows, "model.rates");

        if (kind == "forward_performance") {
            ForwardPerformanceDriver fp;
            fp.m0 = ex.rates.m0;
            fp.delta = detail::require_field(driver, "delta", "model.driver").get<double>();
            fp.theta = detail::make_theta(detail::require_field(driver, "theta", "model.driver"),
                                          fp.m0, ex.factor.dim, fp.theta_bound, fp.theta_lip,
                                          "model.driver.theta");
            const auto& cons = detail::require_field(driver, "constraints", "model.driver");
            for (std::size_t i = 0; i < cons.size(); ++i)
                fp.constraints.push_back(detail::make_constraint(
                    cons[i], "model.driver.constraints[" + std::to_string(i) + "]"));
            check_fp_driver(fp);
            ex.fp_driver = fp;
            ex.driver_set = fp_driver_set(fp);
        } else if (kind == "constant") {
            const double value = detail::require_field(driver, "value", "model.driver").get<double>();
            ex.driver_set.m0 = ex.rates.m0;
            ex.driver_set.f = [value](int, const Vec&, const Vec&) { return value; };
            ex.driver_set.c_v = 0.0;
            ex.driver_set.c_z = 0.0;
            ex.driver_set.k_f = std::fabs(value);
        } else {
            throw Error(ErrorCode::ConfigError, "unknown driver kind '" + kind + "'",
                        "model.driver.kind");
        }
        if (driver.contains("constants")) {
            const auto& c = driver["constants"];
            ex.driver_set.c_v = detail::get_or(c, "C_v", ex.driver_set.c_v);
            ex.driver_set.c_z = detail::get_or(c, "C_z", ex.driver_set.c_z);
            ex.driver_set.k_f = detail::get_or(c, "K_f", ex.driver_set.k_f);
        }
    }

    validate_factor(ex.factor, ex.driver_set.c_v, vc, "model.factor");
    validate_driver(ex.driver_set, ex.factor.dim, vc, "model.driver");
    ex.apriori = apriori_constants(ex.driver_set, ex.factor, ex.rates, 0.0);

    if (root.contains("ergodic")) {
        const auto& e = root["ergodic"];
        ex.rho_sequence = detail::get_or(e, "rho_sequence", ex.rho_sequence);
        ex.v0 = detail::get_or(e, "v0", 0.0);
        if (e.contains("reference_regime")) {
            ex.reference_regime = e["reference_regime"].get<int>() - 1;  // 1-based in configs
            if (ex.reference_regime < 0 || ex.reference_regime >= ex.rates.m0)
                throw Error(ErrorCode::ConfigError, "reference regime out of range",
                            "ergodic.reference_regime");
        }
        ex.t1 = detail::get_or(e, "T1", ex.t1);
        ex.t2 = detail::get_or(e, "T2", ex.t2);
        ex.horizons = detail::get_or(e, "horizons", ex.horizons);
        ex.ergodic_inline = detail::get_or(e, "inline", true);
        ex.initial_kind = detail::get_or<std::string>(e, "initial", "zero");
    }
    if (ex.horizons.empty())
        ex.horizons = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 28};

    if (root.contains("mc")) {
        const auto& m = root["mc"];
        ex.mc.horizon = detail::get_or(m, "T", 1.0);
        ex.mc.n_paths = detail::get_or(m, "n_paths", 10000);
        ex.mc.n_steps = detail::get_or(m, "n_steps", 128);
        ex.mc.seed = detail::get_or<std::uint64_t>(m, "seed", 1);
        ex.mc.strategy = detail::get_or<std::string>(m, "strategy", "optimal");
        ex.mc.perturbation = detail::get_or(m, "perturbation", 0.2);
        ex.mc.x0 = detail::get_or(m, "x0", 1.0);
        ex.mc.i0 = detail::get_or(m, "i0", 1) - 1;  // 1-based in configs
        ex.mc.v0 = detail::get_or(m, "v0", 0.0);
        ex.mc.t = detail::get_or(m, "t", 0.0);
        ex.mc.s = detail::get_or(m, "s", ex.mc.horizon);
        ex.mc.record_times = detail::get_or(m, "record_times", ex.mc.record_times);
        if (ex.mc.i0 < 0 || ex.mc.i0 >= ex.rates.m0)
            throw Error(ErrorCode::ConfigError, "initial regime out of range", "mc.i0");
    }
    if (root.contains("outputs"))
        ex.thin_paths = detail::get_or(root["outputs"], "thin_paths", 0);
    return ex;
}

inline Experiment load_experiment(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + file + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_experiment(j);
}

inline System1D experiment_system(const Experiment& ex) {
    return make_system(ex.grid, ex.factor, ex.rates, ex.driver_set, ex.apriori);
}

inline MarketSpec experiment_market(const Experiment& ex) {
    if (!ex.fp_driver)
        throw Error(ErrorCode::ConfigError,
                    "Monte Carlo commands need a forward_performance driver", "model.driver.kind");
    MarketSpec spec;
    spec.factor = ex.factor;
    spec.rates = ex.rates;
    spec.driver = *ex.fp_driver;
    spec.x0 = ex.mc.x0;
    spec.i0 = ex.mc.i0;
    spec.v0 = Vec::scalar(ex.mc.v0);
    spec.v0.d = ex.factor.dim;
    return spec;
}

inline Strategy experiment_strategy(const Experiment& ex) {
    if (ex.mc.strategy == "optimal") return Strategy::optimal();
    if (ex.mc.strategy == "zero") return Strategy::zero();
    if (ex.mc.strategy == "perturbed") {
        if (!ex.fp_driver)
            throw Error(ErrorCode::ConfigError, "perturbed strategy needs a market driver",
                        "mc.strategy");
        return perturbed_optimal_strategy(*ex.fp_driver, ex.mc.perturbation);
    }
    throw Error(ErrorCode::ConfigError, "unknown strategy '" + ex.mc.strategy + "'", "mc.strategy");
}

}  // namespace ebsde
