#include <catch2/catch_amalgamated.hpp>

#include "ebsde/drivers.hpp"
#include "ebsde/oracles.hpp"
#include "ebsde/rng.hpp"

using namespace ebsde;

namespace {

ForwardPerformanceDriver test_driver(ConstraintSet set, double theta_const = 0.4,
                                     double delta = 0.5) {
    ForwardPerformanceDriver drv;
    drv.m0 = 1;
    drv.delta = delta;
    drv.theta = [theta_const](int, const Vec&) { return Vec::scalar(theta_const); };
    drv.constraints = {set};
    drv.theta_bound = std::fabs(theta_const);
    drv.theta_lip = 0.0;
    return drv;
}

}  // namespace

TEST_CASE("projections") {
    SECTION("identity on the full space") {
        Vec x{{3.0, -2.0}, 2};
        const Vec p = project(ConstraintSet::full_space(), x);
        CHECK(p[0] == 3.0);
        CHECK(p[1] == -2.0);
    }
    SECTION("interval clamp") {
        const Vec p = project(ConstraintSet::interval(0.0, 1.0), Vec::scalar(3.0));
        CHECK(p[0] == 1.0);
    }
    SECTION("axis subspace kills the masked axis") {
        const Vec p = project(ConstraintSet::subspace({true, false}), Vec{{2.0, 5.0}, 2});
        CHECK(p[0] == 2.0);
        CHECK(p[1] == 0.0);
    }
    SECTION("firmly nonexpansive on samples") {
        const auto sets = {ConstraintSet::interval(-0.5, 1.2),
                           ConstraintSet::box({-1.0, 0.0}, {1.0, 0.5}),
                           ConstraintSet::subspace({false, true})};
        CounterRng rng(11, 0);
        for (const auto& s : sets)
            for (int k = 0; k < 300; ++k) {
                Vec x{{6.0 * (rng.uniform() - 0.5), 6.0 * (rng.uniform() - 0.5)}, 2};
                Vec y{{6.0 * (rng.uniform() - 0.5), 6.0 * (rng.uniform() - 0.5)}, 2};
                CHECK(norm(project(s, x) - project(s, y)) <= norm(x - y) + 1e-13);
            }
    }
}

TEST_CASE("driver evaluation examples") {
    SECTION("unconstrained, distance term vanishes") {
        const auto drv = test_driver(ConstraintSet::full_space());
        const double f = eval_fp_driver(drv, 0, Vec::scalar(0.0), Vec::scalar(0.0));
        CHECK(f == Catch::Approx(0.08).margin(1e-14));
    }
    SECTION("z = -theta leaves only the theta quadratic when 0 is admissible") {
        const auto drv = test_driver(ConstraintSet::interval(-1.0, 1.0));
        const double f = eval_fp_driver(drv, 0, Vec::scalar(0.3), Vec::scalar(-0.4));
        CHECK(f == Catch::Approx(0.5 * 0.4 * 0.4).margin(1e-14));
    }
    SECTION("forced zero strategy cancels exactly") {
        const auto drv = test_driver(ConstraintSet::interval(0.0, 0.0));
        const double f = eval_fp_driver(drv, 0, Vec::scalar(0.0), Vec::scalar(0.0));
        CHECK(f == Catch::Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("controlled driver and optimal strategy") {
    const Vec v0 = Vec::scalar(0.0);
    SECTION("pi = 0 leaves the quadratic variation term") {
        const auto drv = test_driver(ConstraintSet::full_space());
        const double f = eval_controlled_driver(drv, 0, v0, Vec::scalar(0.7), Vec::scalar(0.0));
        CHECK(f == Catch::Approx(0.5 * 0.49).margin(1e-14));
    }
    SECTION("unconstrained maximizer attains the driver value") {
        const auto drv = test_driver(ConstraintSet::full_space());
        const Vec z = Vec::scalar(0.2);
        const Vec pi = optimal_strategy(drv, 0, v0, z);
        CHECK(pi[0] == Catch::Approx((0.2 + 0.4) / 0.5).margin(1e-14));
        const double lhs = eval_controlled_driver(drv, 0, v0, z, pi);
        CHECK(lhs == Catch::Approx(eval_fp_driver(drv, 0, v0, z)).margin(1e-12));
    }
    SECTION("clamped maximizer") {
        const auto drv = test_driver(ConstraintSet::interval(0.0, 0.5));
        const Vec pi = optimal_strategy(drv, 0, v0, Vec::scalar(0.0));
        CHECK(pi[0] == 0.5);
    }
    SECTION("sup representation against the grid-search oracle") {
        const auto sets = {ConstraintSet::full_space(), ConstraintSet::interval(-0.3, 0.9)};
        CounterRng rng(13, 0);
        for (const auto& s : sets) {
            const auto drv = test_driver(s);
            for (int k = 0; k < 20; ++k) {
                const Vec v = Vec::scalar(4.0 * (rng.uniform() - 0.5));
                const Vec z = Vec::scalar(2.0 * (rng.uniform() - 0.5));
                const auto best = oracles::sup_search(
                    [&](const Vec& pi) { return eval_controlled_driver(drv, 0, v, z, pi); }, s,
                    1e-3, 1);
                const double fval = eval_fp_driver(drv, 0, v, z);
                CHECK(fval >= best.max - 1e-12);
                CHECK(fval <= best.max + 1e-4);
                const Vec pi_star = optimal_strategy(drv, 0, v, z);
                CHECK(eval_controlled_driver(drv, 0, v, z, pi_star) >= best.max - 1e-6);
            }
        }
    }
}

TEST_CASE("closed-form benchmarks") {
    ClosedFormBenchmark b1;
    b1.variant = ClosedFormBenchmark::Variant::example1;
    ClosedFormBenchmark b2;
    b2.variant = ClosedFormBenchmark::Variant::example2;

    SECTION("pinned values") {
        const auto p = benchmark_solution(b1, 0.0);
        CHECK(p.z == Catch::Approx(0.5).margin(1e-14));
        CHECK(p.lambda == 0.0);
        CHECK(benchmark_solution(b2, 1.3).lambda ==
              Catch::Approx(0.19947114020071635).margin(1e-15));
        CHECK(b1.y(0.0) == Catch::Approx(0.0).margin(1e-14));
        CHECK(b2.y(0.0) == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("stationary equation residual, first variant") {
        for (double v = -4.0; v <= 4.0; v += 1.0 / 16.0) {
            const double residual =
                0.5 * b1.z_prime(v) - 0.5 * v * b1.z(v) + b1.driver(v) - b1.lambda();
            CHECK(std::fabs(residual) < 1e-10);
        }
    }

    SECTION("stationary equation residual, second variant, both branches") {
        for (double v = -4.0; v <= 4.0; v += 1.0 / 16.0) {
            const double residual =
                0.5 * b2.z_prime(v) - 0.5 * v * b2.z(v) + b2.driver(v) - b2.lambda();
            CHECK(std::fabs(residual) < 1e-8);
        }
        CHECK(std::fabs(b2.z(1e-12) - b2.z(-1e-12)) < 1e-11);  // continuity at the kink
    }

    SECTION("profile consistency: y integrates z") {
        for (const auto& b : {b1, b2})
            for (double v : {-3.0, -1.0, 0.5, 2.0, 4.5}) {
                const double quad = gauss_legendre([&](double u) { return b.z(u); }, 0.0, v, 64);
                CHECK(b.y(v) == Catch::Approx(quad).margin(5e-11));
            }
    }
}

TEST_CASE("normal CDF against a quadrature oracle") {
    // independent check through the density integral
    for (double x = -4.0; x <= 4.0; x += 0.25) {
        const double quad =
            0.5 + gauss_legendre(
                      [](double u) { return 0.3989422804014327 * std::exp(-0.5 * u * u); }, 0.0,
                      x, 32);
        CHECK(normal_cdf(x) == Catch::Approx(quad).margin(1e-13));
    }
    CHECK(normal_cdf(0.0) == 0.5);
    // erfcx consistency: N(-x) = erfcx(x/sqrt(2)) e^{-x^2/2} / 2 for x > 0
    for (double x = 0.5; x <= 8.0; x += 0.5) {
        const double via_erfcx =
            0.5 * erfcx(x * 0.7071067811865475244) * std::exp(-0.5 * x * x);
        CHECK(normal_cdf(-x) == Catch::Approx(via_erfcx).epsilon(1e-12));
    }
}
