#include <catch2/catch_amalgamated.hpp>

#include "ebsde/drivers.hpp"
#include "ebsde/oracles.hpp"
#include "ebsde/pde.hpp"

using namespace ebsde;

namespace {

System1D benchmark_system(ClosedFormBenchmark::Variant variant, int n) {
    ClosedFormBenchmark b;
    b.variant = variant;
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{0.0}});
    const auto ds = benchmark_driver_set(b);
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    return make_system(Grid1D(-6.0, 6.0, n), fm, rm, ds, ap);
}

std::vector<std::vector<double>> nodal(const System1D& sys,
                                       const std::function<double(int, double)>& f) {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < sys.rates.m0; ++i) {
        auto& row = out.emplace_back(static_cast<std::size_t>(sys.grid.n));
        for (int j = 0; j < sys.grid.n; ++j) row[static_cast<std::size_t>(j)] = f(i, sys.grid.node(j));
    }
    return out;
}

}  // namespace

TEST_CASE("gradient stencil") {
    Grid1D g(-2.0, 2.0, 41);
    SECTION("exact for affine data") {
        std::vector<double> y(41);
        for (int j = 0; j < 41; ++j) y[static_cast<std::size_t>(j)] = 3.0 - 1.7 * g.node(j);
        for (double z : compute_z(y, g)) CHECK(z == Catch::Approx(-1.7).margin(1e-13));
    }
    SECTION("second order against the closed form") {
        ClosedFormBenchmark b;
        Grid1D fine(-6.0, 6.0, 401);
        std::vector<double> y(static_cast<std::size_t>(fine.n));
        for (int j = 0; j < fine.n; ++j) y[static_cast<std::size_t>(j)] = b.y(fine.node(j));
        const double err =
            oracles::fd_gradient_check(y, fine, 1.0, [&](double v) { return b.z(v); });
        CHECK(err < 2.0 * fine.h * fine.h);
    }
}

TEST_CASE("constants are stationary for the trivial model") {
    auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 101);
    sys.f = [](int, double, double) { return 0.0; };
    SchemeConfig cfg;
    ParabolicStepper stepper(sys, 0.0, 0.0, cfg);
    std::vector<std::vector<double>> y{std::vector<double>(101, 3.25)};
    StepCounters counters;
    for (int k = 0; k < 50; ++k) stepper.step(y, counters);
    for (double v : y[0]) CHECK(v == Catch::Approx(3.25).margin(1e-13));
}

TEST_CASE("identical regimes stay identical") {
    ClosedFormBenchmark b;
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{-1.0, 1.0}, {1.0, -1.0}});
    DriverSet ds = benchmark_driver_set(b);
    ds.m0 = 2;
    auto base = ds.f;
    ds.f = [base](int, const Vec& v, const Vec& z) { return base(0, v, z); };
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    auto sys = make_system(Grid1D(-6.0, 6.0, 201), fm, rm, ds, ap);
    SchemeConfig cfg;
    ParabolicStepper stepper(sys, 0.1, 0.0, cfg);
    std::vector<std::vector<double>> y(2, std::vector<double>(201, 0.0));
    StepCounters counters;
    for (int k = 0; k < 400; ++k) stepper.step(y, counters);
    for (int j = 0; j < 201; ++j)
        CHECK(y[0][static_cast<std::size_t>(j)] == y[1][static_cast<std::size_t>(j)]);
    CHECK(counters.clamp_fires == 0);
}

TEST_CASE("closed form is a numerical stationary point") {
    ClosedFormBenchmark b;
    auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 4097);
    SchemeConfig cfg;
    ParabolicStepper stepper(sys, 0.0, 0.0, cfg);
    auto y = nodal(sys, [&](int, double v) { return b.y(v); });
    const auto before = y;
    StepCounters counters;
    stepper.step(y, counters);
    double change = 0.0;
    const int margin = static_cast<int>(1.0 / sys.grid.h);  // interior, one unit in
    for (int j = margin; j < sys.grid.n - margin; ++j)
        change = std::max(change, std::fabs(y[0][static_cast<std::size_t>(j)] -
                                            before[0][static_cast<std::size_t>(j)]));
    CHECK(change <= 1e-6 * stepper.dt());
}

TEST_CASE("finite-horizon solve") {
    ClosedFormBenchmark b;
    auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 801);
    SchemeConfig cfg;

    SECTION("initial data is reproduced exactly at t = 0") {
        auto h0 = nodal(sys, [&](int, double v) { return std::tanh(v); });
        const auto sol = solve_finite_horizon(sys, 0.0, 0.0, h0, 0.5, cfg, {0.0, 0.5});
        REQUIRE(sol.times.front() == 0.0);
        CHECK(sol.y.front() == h0);
    }

    SECTION("stationary start drifts only by truncation error over T = 5") {
        auto h0 = nodal(sys, [&](int, double v) { return b.y(v); });
        const auto sol = solve_finite_horizon(sys, 0.0, 0.0, h0, 5.0, cfg, {5.0});
        double err = 0.0;
        const int lo = sys.grid.nearest(-5.0), hi = sys.grid.nearest(5.0);
        for (int j = lo; j <= hi; ++j)
            err = std::max(err, std::fabs(sol.y.back()[0][static_cast<std::size_t>(j)] -
                                          h0[0][static_cast<std::size_t>(j)]));
        CHECK(err <= 5.0 * sys.grid.h * sys.grid.h);
    }

    SECTION("ordered initial data stays ordered") {
        auto lo = nodal(sys, [&](int, double v) { return std::sin(v); });
        auto hi = nodal(sys, [&](int, double v) { return std::sin(v) + 0.3 + 0.1 * std::tanh(v); });
        const auto sol_lo = solve_finite_horizon(sys, 0.0, 0.0, lo, 1.0, cfg, {}, 16);
        const auto sol_hi = solve_finite_horizon(sys, 0.0, 0.0, hi, 1.0, cfg, {}, 16);
        REQUIRE(sol_lo.times == sol_hi.times);
        for (std::size_t t = 0; t < sol_lo.times.size(); ++t)
            for (int j = 0; j < sys.grid.n; ++j)
                CHECK(sol_lo.y[t][0][static_cast<std::size_t>(j)] <=
                      sol_hi.y[t][0][static_cast<std::size_t>(j)] + 1e-12);
    }
}

TEST_CASE("discounted stationary solve") {
    SECTION("constant driver has the algebraic fixed point") {
        auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 151);
        sys.f = [](int, double, double) { return 0.7; };
        SchemeConfig cfg;
        const auto st = solve_discounted_stationary(sys, 0.35, cfg);
        for (double v : st.y[0]) CHECK(v == Catch::Approx(2.0).margin(1e-6));
        for (double z : st.z[0]) CHECK(std::fabs(z) < 1e-8);
    }

    SECTION("respects the a priori sup bound and the ODE majorant") {
        ClosedFormBenchmark b;
        auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 401);
        const double rho = 0.1;
        const double k_f = 0.3033;
        SchemeConfig cfg;
        ParabolicStepper stepper(sys, rho, 0.0, cfg);
        std::vector<std::vector<double>> y{std::vector<double>(401, 0.0)};
        StepCounters counters;
        for (long s = 1; s <= 4000; ++s) {
            stepper.step(y, counters);
            double sup = 0.0;
            for (double v : y[0]) sup = std::max(sup, std::fabs(v));
            const double bound = oracles::discounted_ode_bound(k_f, rho, s * stepper.dt(), 0.0);
            CHECK(sup <= bound + 1e-12);
            CHECK(sup <= k_f / rho + 1e-12);
        }
    }

    SECTION("max_steps is enforced") {
        auto sys = benchmark_system(ClosedFormBenchmark::Variant::example1, 101);
        SchemeConfig cfg;
        cfg.max_steps = 5;
        try {
            solve_discounted_stationary(sys, 0.05, cfg);
            FAIL("expected MaxStepsExceeded");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MaxStepsExceeded);
        }
    }

    SECTION("z stays within the declared gradient bound") {
        auto sys = benchmark_system(ClosedFormBenchmark::Variant::example2, 401);
        SchemeConfig cfg;
        const auto st = solve_discounted_stationary(sys, 0.1, cfg);
        double sup_z = 0.0;
        for (double z : st.z[0]) sup_z = std::max(sup_z, std::fabs(z));
        // the closed-form gradient is below 1/2; the declared envelope is far looser
        CHECK(sup_z < 0.6);
    }
}

TEST_CASE("regime relabeling symmetry") {
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{-0.5, 0.5}, {0.2, -0.2}});
    const auto rm_perm = validate_rate_matrix({{-0.2, 0.2}, {0.5, -0.5}});
    DriverSet ds;
    ds.m0 = 2;
    ds.f = [](int i, const Vec& v, const Vec&) {
        return (i == 0 ? 0.2 : -0.1) * std::exp(-0.5 * v[0] * v[0]);
    };
    ds.c_v = 0.25;
    ds.c_z = 0.0;
    ds.k_f = 0.2;
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    DriverSet ds_perm = ds;
    auto base = ds.f;
    ds_perm.f = [base](int i, const Vec& v, const Vec& z) { return base(1 - i, v, z); };

    Grid1D g(-6.0, 6.0, 201);
    SchemeConfig cfg;
    const auto a = solve_discounted_stationary(make_system(g, fm, rm, ds, ap), 0.2, cfg);
    const auto bsol =
        solve_discounted_stationary(make_system(g, fm, rm_perm, ds_perm, ap), 0.2, cfg);
    for (int j = 0; j < g.n; ++j) {
        CHECK(a.y[0][static_cast<std::size_t>(j)] ==
              Catch::Approx(bsol.y[1][static_cast<std::size_t>(j)]).margin(1e-12));
        CHECK(a.y[1][static_cast<std::size_t>(j)] ==
              Catch::Approx(bsol.y[0][static_cast<std::size_t>(j)]).margin(1e-12));
    }
}
