#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icrm/rng.hpp"
#include "icrm/specfun.hpp"

using namespace icrm;

namespace {

// Independent summation oracle: psi_1(x) = sum_{k<K} 1/(x+k)^2 plus the
// Euler-Maclaurin tail of the truncated series.
double trigamma_by_summation(double x, int terms = 40000) {
    double s = 0.0;
    for (int k = terms - 1; k >= 0; --k) {
        const double t = x + k;
        s += 1.0 / (t * t);
    }
    const double y = x + terms;
    s += 1.0 / y + 1.0 / (2.0 * y * y) + 1.0 / (6.0 * y * y * y);
    return s;
}

}  // namespace

TEST_CASE("log_gamma matches factorial and half-integer identities") {
    CHECK(log_gamma(1.0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(log_gamma(5.0) == Catch::Approx(std::log(24.0)).epsilon(1e-13));
    CHECK(log_gamma(0.5) == Catch::Approx(0.5 * std::log(M_PI)).epsilon(1e-13));
    CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(log_gamma(-1.5), std::domain_error);
}

TEST_CASE("digamma identities") {
    CHECK(digamma(1.0) == Catch::Approx(-kEulerGamma).margin(1e-14));
    CHECK(digamma(2.0) == Catch::Approx(1.0 - kEulerGamma).margin(1e-14));
    CHECK(digamma(0.5) == Catch::Approx(-kEulerGamma - 2.0 * std::log(2.0)).margin(1e-13));
    CHECK_THROWS_AS(digamma(0.0), std::domain_error);
}

TEST_CASE("trigamma identities and summation oracle") {
    const double pi2_6 = M_PI * M_PI / 6.0;
    CHECK(trigamma(1.0) == Catch::Approx(pi2_6).margin(1e-13));
    CHECK(trigamma(2.0) == Catch::Approx(pi2_6 - 1.0).margin(1e-13));
    CHECK(trigamma(10.0) == Catch::Approx(trigamma_by_summation(10.0)).margin(1e-11));
    CHECK_THROWS_AS(trigamma(-0.5), std::domain_error);
}

TEST_CASE("tetragamma identities and finite-difference oracle") {
    const double two_zeta3 = 2.4041138063191885708;  // 2*zeta(3)
    CHECK(tetragamma(1.0) == Catch::Approx(-two_zeta3).margin(1e-12));
    CHECK(tetragamma(2.0) == Catch::Approx(-two_zeta3 + 2.0).margin(1e-12));
    // frozen from the central finite difference of trigamma (step 1e-4)
    const double fd = (trigamma(5.0 + 1e-4) - trigamma(5.0 - 1e-4)) / 2e-4;
    CHECK(fd == Catch::Approx(-0.0487897322451).margin(1e-9));
    CHECK(tetragamma(5.0) == Catch::Approx(fd).epsilon(1e-6));
    CHECK_THROWS_AS(tetragamma(0.0), std::domain_error);
}

TEST_CASE("sigmoid and softplus basics") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(std::log(3.0)) == Catch::Approx(0.75).margin(1e-15));
    CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)).margin(1e-15));
    // overflow-free out to |x| = 700
    CHECK(std::isfinite(softplus(700.0)));
    CHECK(std::isfinite(softplus(-700.0)));
    CHECK(std::isfinite(sigmoid(700.0)));
    CHECK(sigmoid(-700.0) >= 0.0);
}

TEST_CASE("recurrences hold on 1000 log-uniform samples in [1e-3, 1e3]") {
    Rng rng(20240817);
    for (int i = 0; i < 1000; ++i) {
        const double x = std::exp(std::log(1e-3) + rng.uniform01() * std::log(1e6));
        CAPTURE(x);
        REQUIRE(std::fabs(digamma(x + 1.0) - (digamma(x) + 1.0 / x)) < 1e-12);
        REQUIRE(std::fabs(trigamma(x + 1.0) - (trigamma(x) - 1.0 / (x * x))) < 1e-10);
        REQUIRE(trigamma(x) > 0.0);
        const double t2 = tetragamma(x);
        REQUIRE(t2 < 0.0);
        REQUIRE(std::fabs(tetragamma(x + 1.0) - (t2 + 2.0 / (x * x * x))) <
                1e-10 * std::fmax(1.0, std::fabs(t2)));
        const double lg = log_gamma(x + 1.0) - (log_gamma(x) + std::log(x));
        REQUIRE(std::fabs(lg) <= 1e-12 * std::fmax(1.0, std::fabs(log_gamma(x + 1.0))));
    }
}

TEST_CASE("sigmoid/softplus identities on random samples") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double x = 40.0 * (rng.uniform01() - 0.5);
        REQUIRE(std::fabs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15);
        REQUIRE(std::fabs(softplus(x) - softplus(-x) - x) <= 1e-12);
        REQUIRE(softplus(x) > 0.0);
    }
}

TEST_CASE("digamma and trigamma match central finite differences") {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        const double x = std::exp(std::log(0.1) + rng.uniform01() * std::log(1000.0));
        CAPTURE(x);
        const double h = 1e-5;
        const double fd_psi = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
        REQUIRE(std::fabs(digamma(x) - fd_psi) <= 1e-6 * std::fmax(std::fabs(fd_psi), 1e-3));
        const double fd_psi1 = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
        REQUIRE(std::fabs(trigamma(x) - fd_psi1) <= 1e-6 * std::fmax(std::fabs(fd_psi1), 1e-3));
    }
}
