// Command-line front end: runs the experiment types from a JSON config and
// writes CSV/JSON results with reproducibility metadata.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebsde/config.hpp"
#include "ebsde/csv.hpp"
#include "ebsde/ergodic.hpp"
#include "ebsde/mc.hpp"
#include "ebsde/pde.hpp"
#include "ebsde/version.hpp"

namespace {

using ebsde::json;

int exit_code_for(const ebsde::Error& e) {
    switch (e.code()) {
        case ebsde::ErrorCode::RowSumViolation:
        case ebsde::ErrorCode::NegativeOffDiagonal:
        case ebsde::ErrorCode::DegenerateDissipativity:
        case ebsde::ErrorCode::ZeroDiscount:
        case ebsde::ErrorCode::ValidationFailure:
        case ebsde::ErrorCode::StepTooLarge:
        case ebsde::ErrorCode::ConfigError:
            return 2;
        case ebsde::ErrorCode::NonFiniteState:
        case ebsde::ErrorCode::MaxStepsExceeded:
        case ebsde::ErrorCode::HorizonTooShort:
            return 3;
        case ebsde::ErrorCode::DegenerateFit:
            return 4;
        case ebsde::ErrorCode::InconclusiveBias:
            return 5;
    }
    return 1;
}

struct Cli {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    bool strict = false;
};

std::vector<std::string> metadata_lines(const ebsde::Experiment& ex, std::uint64_t seed) {
    std::vector<std::string> m;
    m.push_back("config_digest: " + ebsde::hex_digest(ex.digest));
    m.push_back("seed: " + std::to_string(seed));
    m.push_back("grid: v_min=" + ebsde::CsvWriter::fmt(ex.grid.v_min) +
                " v_max=" + ebsde::CsvWriter::fmt(ex.grid.v_max) + " n=" + std::to_string(ex.grid.n));
    m.push_back("scheme: dt=" + ebsde::CsvWriter::fmt(ex.scheme.dt) +
                " theta=" + ebsde::CsvWriter::fmt(ex.scheme.theta_scheme) +
                " tol=" + ebsde::CsvWriter::fmt(ex.scheme.stationarity_tol));
    m.push_back(std::string("version: ") + ebsde::library_version);
    return m;
}

std::string out_path(const Cli& cli, const std::string& name) {
    std::filesystem::create_directories(cli.out_dir);
    return (std::filesystem::path(cli.out_dir) / name).string();
}

ebsde::ErgodicSolution compute_ergodic(const ebsde::Experiment& ex) {
    const auto sys = ebsde::experiment_system(ex);
    return ebsde::vanishing_discount(sys, ex.apriori, ex.rho_sequence, ex.v0, ex.scheme,
                                     ex.reference_regime);
}

void write_ergodic_outputs(const Cli& cli, const ebsde::Experiment& ex,
                           const ebsde::ErgodicSolution& sol, std::uint64_t seed) {
    const auto meta = metadata_lines(ex, seed);
    {
        ebsde::CsvWriter profile(out_path(cli, "ergodic_profile.csv"), meta,
                                 {"regime", "v", "y", "z"});
        for (int i = 0; i < static_cast<int>(sol.y.size()); ++i)
            for (int j = 0; j < sol.grid.n; ++j)
                profile.row(i + 1, sol.grid.node(j), sol.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                            sol.z[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    {
        ebsde::CsvWriter trace(out_path(cli, "lambda_trace.csv"), meta, {"rho", "lambda_rho"});
        for (const auto& pt : sol.rho_trace) trace.row(pt.rho, pt.lambda_rho);
    }
    const auto& d = sol.diagnostics;
    json diag{{"lambda", sol.lambda},
              {"lambda_discount_limit", d.lambda_discount_limit},
              {"polish_drift", d.polish_drift},
              {"reference_regime", sol.reference_regime + 1},
              {"sup_z", d.sup_z},
              {"z_bound", d.z_bound},
              {"z_bound_ok", d.z_bound_ok},
              {"max_regime_gap", d.max_regime_gap},
              {"diff_bound", d.diff_bound},
              {"diff_bound_ok", d.diff_bound_ok},
              {"growth_coeff", d.growth_coeff},
              {"clamp_fires_at_convergence", d.clamp_fires_last},
              {"non_monotone_lambda", d.non_monotone_lambda},
              {"richardson_fallback", d.richardson_fallback},
              {"discount_steps", d.discount_steps},
              {"polish_steps", d.polish_steps},
              {"config_digest", ebsde::hex_digest(ex.digest)},
              {"seed", seed},
              {"version", ebsde::library_version}};
    if (!std::isfinite(d.diff_bound)) diag["diff_bound"] = "inf";
    std::ofstream(out_path(cli, "diagnostics.json")) << diag.dump(2) << "\n";
}

int cmd_solve_ergodic(const Cli& cli) {
    auto ex = ebsde::load_experiment(cli.config_path);
    const std::uint64_t seed = cli.seed_override.value_or(ex.mc.seed);
    const auto sol = compute_ergodic(ex);
    write_ergodic_outputs(cli, ex, sol, seed);
    return 0;
}

int cmd_large_time(const Cli& cli) {
    auto ex = ebsde::load_experiment(cli.config_path);
    const std::uint64_t seed = cli.seed_override.value_or(ex.mc.seed);
    if (!ex.ergodic_inline)
        throw ebsde::Error(ebsde::ErrorCode::ConfigError,
                           "no ergodic input given and inline computation disabled", "ergodic.inline");
    const auto sys = ebsde::experiment_system(ex);
    const auto sol = ebsde::vanishing_discount(sys, ex.apriori, ex.rho_sequence, ex.v0, ex.scheme,
                                               ex.reference_regime);
    std::vector<std::vector<double>> initial;
    if (ex.initial_kind == "ergodic")
        initial = sol.y;
    else
        initial.assign(sol.y.size(), std::vector<double>(static_cast<std::size_t>(ex.grid.n), 0.0));
    const auto rep = ebsde::large_time_report(sys, sol, initial, ex.horizons, ex.scheme);

    const auto meta = metadata_lines(ex, seed);
    {
        ebsde::CsvWriter table(out_path(cli, "large_time.csv"), meta, {"T", "deltaY", "residual"});
        for (std::size_t k = 0; k < rep.horizons.size(); ++k)
            table.row(rep.horizons[k], rep.delta_y[k], rep.residuals[k]);
    }
    json fit{{"L", rep.L},
             {"C_fit", rep.c_fit},
             {"K_v_fit", rep.k_v_fit},
             {"fit_quality", rep.fit_quality},
             {"degenerate", rep.degenerate},
             {"noise_floor", rep.noise_floor},
             {"residuals_monotone", rep.residuals_monotone},
             {"regime_spread", rep.regime_spread},
             {"node_spread", rep.node_spread},
             {"reference_horizon", rep.reference_horizon},
             {"lambda", sol.lambda},
             {"config_digest", ebsde::hex_digest(ex.digest)},
             {"seed", seed},
             {"version", ebsde::library_version}};
    std::ofstream(out_path(cli, "large_time_fit.json")) << fit.dump(2) << "\n";
    if (rep.degenerate) {
        std::cerr << json{{"error", "DegenerateFit"},
                          {"message", "residuals below discretization noise; fit skipped"}}
                         .dump()
                  << "\n";
        return 4;
    }
    return 0;
}

int cmd_simulate(const Cli& cli) {
    auto ex = ebsde::load_experiment(cli.config_path);
    const std::uint64_t seed = cli.seed_override.value_or(ex.mc.seed);
    const auto sol = compute_ergodic(ex);
    const auto market = ebsde::experiment_market(ex);
    const auto strategy = ebsde::experiment_strategy(ex);
    auto record = ex.mc.record_times;
    if (record.empty())
        for (int k = 0; k <= 8; ++k) record.push_back(ex.mc.horizon * k / 8.0);
    const auto bundle = ebsde::simulate_paths(market, strategy, &sol, ex.mc.horizon, ex.mc.n_paths,
                                              ex.mc.n_steps, seed, record, cli.threads);

    const int stride = ex.thin_paths > 0
                           ? std::max(1, bundle.n_paths / ex.thin_paths)
                           : std::max(1, bundle.n_paths / 100);
    long clamps = 0;
    ebsde::CsvWriter paths(out_path(cli, "paths.csv"), metadata_lines(ex, seed),
                           {"path_id", "t", "V", "alpha", "X", "U"});
    for (int p = 0; p < bundle.n_paths; p += stride)
        for (std::size_t r = 0; r < bundle.record_times.size(); ++r) {
            const auto pi = static_cast<std::size_t>(p);
            const double u = ebsde::eval_forward_performance(
                sol, bundle.wealth[r][pi], bundle.record_times[r], bundle.regime[r][pi],
                bundle.factor[r][pi][0], market.driver.delta, &clamps);
            paths.row(p, bundle.record_times[r], bundle.factor[r][pi][0],
                      bundle.regime[r][pi] + 1, bundle.wealth[r][pi], u);
        }
    return 0;
}

int cmd_martingale_test(const Cli& cli) {
    auto ex = ebsde::load_experiment(cli.config_path);
    const std::uint64_t seed = cli.seed_override.value_or(ex.mc.seed);
    const auto sol = compute_ergodic(ex);
    const auto market = ebsde::experiment_market(ex);
    const auto strategy = ebsde::experiment_strategy(ex);
    const auto rep = ebsde::martingale_test(market, sol, strategy, ex.mc.t, ex.mc.s, ex.mc.n_paths,
                                            ex.mc.n_steps, seed, {}, cli.threads);
    ebsde::CsvWriter out(out_path(cli, "martingale.csv"), metadata_lines(ex, seed),
                         {"t", "s", "delta", "stderr", "bias_budget", "verdict"});
    out.row(rep.t, rep.s, rep.delta, rep.stderr_, rep.bias_budget,
            std::string(ebsde::verdict_name(rep.verdict)));
    if (rep.inconclusive_bias && cli.strict)
        throw ebsde::Error(ebsde::ErrorCode::InconclusiveBias,
                           "bias budget exceeds 5x statistical error; refine dt or the grid");
    return 0;
}

int cmd_growth_rate(const Cli& cli) {
    auto ex = ebsde::load_experiment(cli.config_path);
    const std::uint64_t seed = cli.seed_override.value_or(ex.mc.seed);
    const auto sol = compute_ergodic(ex);
    const auto market = ebsde::experiment_market(ex);
    const auto strategy = ebsde::experiment_strategy(ex);
    const auto rep = ebsde::risk_sensitive_growth_rate(market, sol, strategy, ex.mc.horizon,
                                                       ex.mc.n_paths, ex.mc.n_steps, seed,
                                                       cli.threads);
    ebsde::CsvWriter out(out_path(cli, "growth_rate.csv"), metadata_lines(ex, seed),
                         {"T", "estimate", "stderr", "top_share", "lambda"});
    out.row(rep.horizon, rep.estimate, rep.stderr_, rep.top_share, sol.lambda);
    if (rep.heavy_tail && cli.strict)
        throw ebsde::Error(ebsde::ErrorCode::InconclusiveBias,
                           "top 1% of paths carry more than half of the mean; increase n_paths");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ergodic BSDE system solver and regime-switching market lab"};
    app.require_subcommand(1);

    Cli cli;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_option("--config", cli.config_path, "experiment config (JSON)")->required();
    app.add_option("--out", cli.out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed_flag, "override the config seed");
    app.add_option("--threads", cli.threads, "parallelism cap (results are independent of it)");
    app.add_flag("--strict", cli.strict, "escalate statistical warnings to a failing exit code");

    auto* c1 = app.add_subcommand("solve-ergodic", "vanishing-discount ergodic solve");
    auto* c2 = app.add_subcommand("large-time", "large-time deviation table and rate fit");
    auto* c3 = app.add_subcommand("simulate", "simulate market paths and dump a thinned sample");
    auto* c4 = app.add_subcommand("martingale-test", "paired forward-performance martingale test");
    auto* c5 = app.add_subcommand("growth-rate", "risk-sensitive long-run growth estimate");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;
    if (seed_set) cli.seed_override = seed_flag;

    try {
        if (c1->parsed()) return cmd_solve_ergodic(cli);
        if (c2->parsed()) return cmd_large_time(cli);
        if (c3->parsed()) return cmd_simulate(cli);
        if (c4->parsed()) return cmd_martingale_test(cli);
        if (c5->parsed()) return cmd_growth_rate(cli);
    } catch (const ebsde::Error& e) {
        std::cerr << ebsde::json{{"error", ebsde::error_code_name(e.code())},
                                 {"path", e.path()},
                                 {"message", e.what()}}
                         .dump()
                  << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << ebsde::json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
