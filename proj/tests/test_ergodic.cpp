#include <catch2/catch_amalgamated.hpp>

#include "ebsde/config.hpp"
#include "ebsde/drivers.hpp"
#include "ebsde/ergodic.hpp"

using namespace ebsde;

namespace {

// coarse grid to keep the unit suite quick; the acceptance suite runs the
// shipped resolutions
System1D coarse_benchmark(ClosedFormBenchmark::Variant variant, int n = 301) {
    ClosedFormBenchmark b;
    b.variant = variant;
    const auto fm = benchmark_factor();
    const auto rm = validate_rate_matrix({{0.0}});
    const auto ds = benchmark_driver_set(b);
    const auto ap = apriori_constants(ds, fm, rm, 0.0);
    return make_system(Grid1D(-6.0, 6.0, n), fm, rm, ds, ap);
}

AprioriConstants benchmark_apriori() {
    ClosedFormBenchmark b;
    return apriori_constants(benchmark_driver_set(b), benchmark_factor(),
                             validate_rate_matrix({{0.0}}), 0.0);
}

const std::vector<double> kRhoSeq{0.1, 0.05, 0.025, 0.0125};

}  // namespace

TEST_CASE("constant driver gives lambda exactly") {
    auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example1, 101);
    sys.f = [](int, double, double) { return 0.37; };
    SchemeConfig cfg;
    const auto ap = benchmark_apriori();
    const auto sol = vanishing_discount(sys, ap, kRhoSeq, 0.0, cfg);
    CHECK(sol.lambda == Catch::Approx(0.37).margin(1e-7));
    for (const auto& pt : sol.rho_trace)
        CHECK(pt.lambda_rho == Catch::Approx(0.37).margin(1e-6));
    for (double v : sol.y[0]) CHECK(std::fabs(v) < 1e-6);
}

TEST_CASE("benchmark lambda via vanishing discount (coarse)") {
    SchemeConfig cfg;
    const auto ap = benchmark_apriori();
    SECTION("first variant, lambda = 0") {
        const auto sol =
            vanishing_discount(coarse_benchmark(ClosedFormBenchmark::Variant::example1), ap,
                               kRhoSeq, 0.0, cfg);
        CHECK(std::fabs(sol.lambda) < 1e-3);
        CHECK(sol.diagnostics.z_bound_ok);
    }
    SECTION("second variant, lambda = 1/(2 sqrt(2 pi))") {
        const auto sol =
            vanishing_discount(coarse_benchmark(ClosedFormBenchmark::Variant::example2), ap,
                               kRhoSeq, 0.0, cfg);
        CHECK(std::fabs(sol.lambda - 0.19947114020071635) < 2e-3);
    }
}

TEST_CASE("profile matches the closed form after the stationary polish") {
    ClosedFormBenchmark b;
    b.variant = ClosedFormBenchmark::Variant::example1;
    SchemeConfig cfg;
    const auto sys = coarse_benchmark(b.variant, 401);
    const auto sol = vanishing_discount(sys, benchmark_apriori(), kRhoSeq, 0.0, cfg);
    const int j0 = sys.grid.nearest(0.0);
    CHECK(std::fabs(sol.y[0][static_cast<std::size_t>(j0)]) < 1e-14);
    double err = 0.0;
    const int lo = sys.grid.n / 10, hi = sys.grid.n - 1 - sys.grid.n / 10;
    const double gauge = b.y(sys.grid.node(j0));
    for (int j = lo; j <= hi; ++j)
        err = std::max(err, std::fabs(sol.y[0][static_cast<std::size_t>(j)] -
                                      (b.y(sys.grid.node(j)) - gauge)));
    CHECK(err < 5.0 * sys.grid.h * sys.grid.h);
}

TEST_CASE("gauge invariance of the reported solution") {
    SchemeConfig cfg;
    const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example1, 201);
    auto sol = vanishing_discount(sys, benchmark_apriori(), {0.1, 0.05, 0.025}, 0.0, cfg);
    auto shifted = sol.y;
    for (auto& yi : shifted)
        for (auto& v : yi) v += 11.5;
    // re-gauging the shifted profile reproduces the original
    const int j0 = sys.grid.nearest(0.0);
    const double c = shifted[static_cast<std::size_t>(sol.reference_regime)]
                            [static_cast<std::size_t>(j0)];
    for (std::size_t i = 0; i < shifted.size(); ++i)
        for (std::size_t j = 0; j < shifted[i].size(); ++j)
            CHECK(shifted[i][j] - c == Catch::Approx(sol.y[i][j]).margin(1e-12));
}

TEST_CASE("long-time slope estimator") {
    SchemeConfig cfg;
    SECTION("first variant slope is near zero") {
        const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example1);
        CHECK(std::fabs(long_time_lambda(sys, 10.0, 20.0, cfg)) < 1e-3);
    }
    SECTION("second variant recovers the positive constant") {
        const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example2);
        CHECK(long_time_lambda(sys, 10.0, 20.0, cfg) ==
              Catch::Approx(0.19947114020071635).margin(2e-3));
    }
    SECTION("too-short horizons are rejected") {
        const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example2);
        try {
            long_time_lambda(sys, 0.25, 1.0, cfg, 1e-5);
            FAIL("expected HorizonTooShort");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::HorizonTooShort);
        }
    }
}

TEST_CASE("estimator agreement on the coarse benchmark") {
    SchemeConfig cfg;
    const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example2);
    const auto sol = vanishing_discount(sys, benchmark_apriori(), kRhoSeq, 0.0, cfg);
    const double slope = long_time_lambda(sys, 10.0, 20.0, cfg);
    CHECK(std::fabs(sol.lambda - slope) <= 3e-3);
}

TEST_CASE("large-time report") {
    SchemeConfig cfg;
    const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example2, 241);
    const auto sol = vanishing_discount(sys, benchmark_apriori(), kRhoSeq, 0.0, cfg);

    SECTION("starting at the ergodic profile is flagged degenerate") {
        const auto rep = large_time_report(sys, sol, sol.y, {2, 4, 6, 8, 10}, cfg);
        CHECK(rep.degenerate);
        for (double d : rep.delta_y) CHECK(std::fabs(d - rep.L) < 5.0 * sys.grid.h * sys.grid.h);
    }

    SECTION("zero start decays exponentially to a level") {
        // the single-regime benchmark relaxes fast; probe early horizons
        std::vector<std::vector<double>> zero(1, std::vector<double>(241, 0.0));
        const auto rep =
            large_time_report(sys, sol, zero, {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 8.0}, cfg);
        CHECK_FALSE(rep.degenerate);
        CHECK(rep.residuals_monotone);
        CHECK(rep.k_v_fit > 0.0);
        CHECK(rep.fit_quality > 0.9);
        CHECK(rep.node_spread < 5.0 * sys.grid.h * sys.grid.h + 0.05 * std::fabs(rep.L) + 1e-4);
    }
}

TEST_CASE("rho sequence validation") {
    SchemeConfig cfg;
    const auto sys = coarse_benchmark(ClosedFormBenchmark::Variant::example1, 101);
    CHECK_THROWS_AS(vanishing_discount(sys, benchmark_apriori(), {0.1, 0.2}, 0.0, cfg), Error);
    CHECK_THROWS_AS(vanishing_discount(sys, benchmark_apriori(), {}, 0.0, cfg), Error);
}
