#include <catch2/catch_amalgamated.hpp>

#include "ebsde/comparison.hpp"
#include "ebsde/drivers.hpp"
#include "ebsde/oracles.hpp"

using namespace ebsde;

namespace {

const Grid1D kGrid(-5.0, 5.0, 101);

ComparisonInstance ode_instance(double k_f, double rho, double horizon) {
    ComparisonInstance inst;
    inst.m0 = 2;
    inst.horizon = horizon;
    inst.eta = [](double v) { return -0.8 * v; };
    inst.lip_f = 0.0;
    inst.lip_g = rho;
    inst.lower.xi = [](int, double) { return 0.0; };
    inst.lower.F = [k_f](int, double, double) { return k_f; };
    inst.lower.G = [rho](int i, double, std::span<const double> y) {
        return -rho * y[static_cast<std::size_t>(i)];
    };
    inst.upper = inst.lower;
    return inst;
}

}  // namespace

TEST_CASE("scalar discount system reproduces the ODE bound") {
    const double k_f = 1.0, rho = 0.5, horizon = 10.0;
    auto inst = ode_instance(k_f, rho, horizon);
    SchemeConfig cfg;
    const auto sol = solve_small_system(inst, inst.lower, kGrid, cfg, 0);
    // spatially constant solution following the scalar comparison ODE
    const double expect = oracles::discounted_ode_bound(k_f, rho, horizon, 0.0);
    const auto& final_y = sol.y.back();
    for (int i = 0; i < inst.m0; ++i)
        for (int j = 0; j < kGrid.n; ++j)
            CHECK(final_y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                  Catch::Approx(expect).margin(2e-3));
}

TEST_CASE("driver gap produces ordered solutions") {
    auto inst = ode_instance(0.5, 0.3, 2.0);
    inst.upper.F = [](int, double, double) { return 0.6; };  // F + 0.1
    SchemeConfig cfg;
    const auto res = check_comparison(inst, kGrid, cfg);
    CHECK(res.verdict == ComparisonVerdict::ORDERED);
    CHECK(res.max_gap > 0.0);
}

TEST_CASE("terminal gap decays but ordering holds") {
    auto inst = ode_instance(0.2, 0.4, 3.0);
    inst.upper.xi = [](int, double) { return 1.0; };
    SchemeConfig cfg;
    const auto res = check_comparison(inst, kGrid, cfg);
    CHECK(res.verdict == ComparisonVerdict::ORDERED);
    const auto lower = solve_small_system(inst, inst.lower, kGrid, cfg, 0);
    const auto upper = solve_small_system(inst, inst.upper, kGrid, cfg, 0);
    // the terminal-data gap (at late PDE time) has shrunk from its initial size
    const double final_gap = upper.y.back()[0][50] - lower.y.back()[0][50];
    CHECK(final_gap < 1.0);
    CHECK(final_gap > 0.0);
}

TEST_CASE("equal instances are ordered with zero gap") {
    auto inst = random_comparison_instance(7);
    inst.upper = inst.lower;
    SchemeConfig cfg;
    const auto res = check_comparison(inst, kGrid, cfg);
    CHECK(res.verdict == ComparisonVerdict::ORDERED);
    CHECK(res.max_violation == 0.0);
}

TEST_CASE("random instances are ordered, broken monotonicity is rejected") {
    SchemeConfig cfg;
    int ordered = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto inst = random_comparison_instance(seed, 2 + static_cast<int>(seed % 2));
        const auto res = check_comparison(inst, kGrid, cfg);
        if (res.verdict == ComparisonVerdict::ORDERED) ++ordered;
        CHECK(res.verdict != ComparisonVerdict::COUNTEREXAMPLE);
    }
    CHECK(ordered == 20);

    const auto broken = random_comparison_instance(3, 2, true);
    const auto res = check_comparison(broken, kGrid, cfg);
    CHECK(res.verdict == ComparisonVerdict::HYPOTHESIS_FAILED);
    CHECK(res.failed_condition == 3);
}

TEST_CASE("no verdict flip under grid refinement") {
    SchemeConfig cfg;
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        const auto inst = random_comparison_instance(seed);
        const auto coarse = check_comparison(inst, Grid1D(-5.0, 5.0, 81), cfg);
        const auto fine = check_comparison(inst, Grid1D(-5.0, 5.0, 161), cfg);
        CHECK(coarse.verdict == ComparisonVerdict::ORDERED);
        CHECK(fine.verdict == ComparisonVerdict::ORDERED);
    }
}

TEST_CASE("exponential coupling equals its clamped version while inactive") {
    ClosedFormBenchmark b;
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{-0.5, 0.5}, {0.5, -0.5}});
    DriverSet ds;
    ds.m0 = 2;
    ds.f = [](int i, const Vec& v, const Vec&) {
        return (i == 0 ? 0.25 : -0.15) * std::exp(-0.5 * v[0] * v[0]);
    };
    ds.c_v = 0.3;
    ds.c_z = 0.0;
    ds.k_f = 0.25;
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    Grid1D g(-6.0, 6.0, 121);
    auto clamped = make_system(g, fm, rm, ds, ap);
    auto unclamped = clamped;
    unclamped.coupling_clamp = 1e9;
    unclamped.coupling_lip = clamped.coupling_lip;  // same dt

    SchemeConfig cfg;
    const auto a = solve_discounted_stationary(clamped, 0.2, cfg);
    const auto bsol = solve_discounted_stationary(unclamped, 0.2, cfg);
    CHECK(a.clamp_fires_last == 0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < g.n; ++j)
            CHECK(a.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                  bsol.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
}

TEST_CASE("uniqueness echo: the stationary point is initialization-independent") {
    ClosedFormBenchmark b;
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{0.0}});
    const auto ds = benchmark_driver_set(b);
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    auto sys = make_system(Grid1D(-6.0, 6.0, 201), fm, rm, ds, ap);
    SchemeConfig cfg;
    const double rho = 0.2;

    const auto from_zero = solve_discounted_stationary(sys, rho, cfg);

    // run the same relaxation from the constant upper bound K_f / rho
    ParabolicStepper stepper(sys, rho, 0.0, cfg);
    std::vector<std::vector<double>> y{std::vector<double>(201, ds.k_f / rho)};
    StepCounters counters;
    double rate = 1.0;
    for (long s = 0; s < cfg.max_steps && rate >= cfg.stationarity_tol; ++s)
        rate = stepper.step(y, counters);
    for (int j = 0; j < 201; ++j)
        CHECK(std::fabs(y[0][static_cast<std::size_t>(j)] -
                        from_zero.y[0][static_cast<std::size_t>(j)]) <
              10.0 * cfg.stationarity_tol);
}
