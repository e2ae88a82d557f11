#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icrm/beta.hpp"
#include "icrm/rng.hpp"

using namespace icrm;

namespace {

// Marsaglia-Tsang gamma sampler for the Monte-Carlo oracle (test-only).
double sample_gamma(Rng& rng, double shape) {
    if (shape < 1.0) {
        const double u = rng.uniform01_open0();
        return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform01_open0();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

double sample_beta(Rng& rng, double a, double b) {
    const double x = sample_gamma(rng, a);
    const double y = sample_gamma(rng, b);
    return x / (x + y);
}

}  // namespace

TEST_CASE("beta mean") {
    CHECK(beta_mean({1, 1}) == Catch::Approx(0.5).margin(1e-15));
    CHECK(beta_mean({3, 1}) == Catch::Approx(0.75).margin(1e-15));
    CHECK(beta_mean({0.5, 1.5}) == Catch::Approx(0.25).margin(1e-15));
    CHECK_THROWS_AS(beta_mean({0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("expected log z closed form") {
    CHECK(expected_log_z({1, 1}) == Catch::Approx(-1.0).margin(1e-13));
    CHECK(expected_log_z({3, 1}) == Catch::Approx(-1.0 / 3.0).margin(1e-13));
    CHECK(expected_log_z({2, 2}) == Catch::Approx(-5.0 / 6.0).margin(1e-13));
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const BetaParams p{0.2 + 10.0 * rng.uniform01(), 0.2 + 10.0 * rng.uniform01()};
        REQUIRE(expected_log_z(p) < 0.0);
    }
}

TEST_CASE("expected log z matches Monte-Carlo within 4 standard errors") {
    Rng shape_rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const BetaParams p{std::exp(std::log(0.2) + shape_rng.uniform01() * std::log(100.0)),
                           std::exp(std::log(0.2) + shape_rng.uniform01() * std::log(100.0))};
        Rng rng(mix_seed(777, trial));
        const int n = 1'000'000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double lz = std::log(sample_beta(rng, p.alpha, p.beta));
            sum += lz;
            sum2 += lz * lz;
        }
        const double mc_mean = sum / n;
        const double mc_var = (sum2 / n - mc_mean * mc_mean) / n;
        const double se = std::sqrt(mc_var);
        CAPTURE(p.alpha, p.beta, mc_mean, se);
        REQUIRE(std::fabs(expected_log_z(p) - mc_mean) <= 4.0 * se + 1e-12);
    }
}

TEST_CASE("kl_beta closed-form spot values") {
    CHECK(kl_beta({1, 1}, {1, 1}) == 0.0);
    // frozen from kl_beta_quadrature (cross-checked by algebra: ln 2 - 1/2)
    CHECK(kl_beta_quadrature({2, 1}, {1, 1}, 128) ==
          Catch::Approx(std::log(2.0) - 0.5).margin(1e-8));
    CHECK(kl_beta({2, 1}, {1, 1}) == Catch::Approx(std::log(2.0) - 0.5).margin(1e-12));
    // frozen from kl_beta_quadrature (algebra: 2 - ln 6)
    CHECK(kl_beta_quadrature({1, 1}, {2, 2}, 128) ==
          Catch::Approx(2.0 - std::log(6.0)).margin(1e-8));
    CHECK(kl_beta({1, 1}, {2, 2}) == Catch::Approx(2.0 - std::log(6.0)).margin(1e-12));
}

TEST_CASE("kl_beta_quadrature preconditions") {
    CHECK(kl_beta_quadrature({1, 1}, {1, 1}, 128) == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(kl_beta_quadrature({0.01, 1}, {1, 1}, 128), std::domain_error);
    CHECK_THROWS_AS(kl_beta_quadrature({1, 1}, {300, 1}, 128), std::domain_error);
    CHECK_THROWS_AS(kl_beta_quadrature({1, 1}, {1, 1}, 32), std::invalid_argument);
    const double agree = std::fabs(kl_beta({5, 3}, {1, 1}) -
                                   kl_beta_quadrature({5, 3}, {1, 1}, 256));
    CHECK(agree < 1e-8);
}

TEST_CASE("closed form agrees with quadrature on 500 random pairs") {
    Rng rng(314159);
    auto shape = [&]() { return std::exp(std::log(0.1) + rng.uniform01() * std::log(500.0)); };
    for (int i = 0; i < 500; ++i) {
        const BetaParams q{shape(), shape()};
        const BetaParams p{shape(), shape()};
        CAPTURE(q.alpha, q.beta, p.alpha, p.beta);
        const double closed = kl_beta(q, p);
        REQUIRE(closed >= 0.0);
        REQUIRE(std::fabs(closed - kl_beta_quadrature(q, p, 256)) <= 1e-7);
    }
}

TEST_CASE("kl_beta is zero iff equal and nonnegative") {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const BetaParams q{std::exp(std::log(0.1) + rng.uniform01() * std::log(500.0)),
                           std::exp(std::log(0.1) + rng.uniform01() * std::log(500.0))};
        REQUIRE(std::fabs(kl_beta(q, q)) <= 1e-12);
        const BetaParams p{q.alpha * 1.3, q.beta};
        REQUIRE(kl_beta(q, p) > 0.0);
    }
    // no overflow at extreme concentrations (log-space evaluation)
    CHECK(std::isfinite(kl_beta({1e8, 1e8}, {1, 1})));
    CHECK(std::isfinite(kl_beta({1e-8, 1.0}, {1, 1})));
}
