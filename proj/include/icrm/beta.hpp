#pragma once

// Beta distribution over the latent preference probability: moments, the
// closed-form Beta-Beta KL divergence, and an independent quadrature oracle
// for it. The closed form works entirely in log-Gamma/digamma space so large
// concentrations cannot overflow.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "icrm/specfun.hpp"

namespace icrm {

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

inline void validate(const BetaParams& p, const char* where) {
    if (!(p.alpha > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) ||
        !std::isfinite(p.beta)) {
        throw std::invalid_argument(std::string(where) + ": Beta shapes must be positive finite");
    }
}

inline double beta_mean(const BetaParams& p) {
    validate(p, "beta_mean");
    return p.alpha / (p.alpha + p.beta);
}

// E[log z] = psi(alpha) - psi(alpha + beta)
inline double expected_log_z(const BetaParams& p) {
    validate(p, "expected_log_z");
    return digamma(p.alpha) - digamma(p.alpha + p.beta);
}

inline double log_beta_fn(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

// KL(q || p) for Beta distributions, four-term closed form.
inline double kl_beta(const BetaParams& q, const BetaParams& p) {
    validate(q, "kl_beta");
    validate(p, "kl_beta");
    const double tq = q.alpha + q.beta;
    const double psi_tq = digamma(tq);
    return log_beta_fn(p.alpha, p.beta) - log_beta_fn(q.alpha, q.beta) +
           (q.alpha - p.alpha) * (digamma(q.alpha) - psi_tq) +
           (q.beta - p.beta) * (digamma(q.beta) - psi_tq);
}

// --------------------------------------------------------------------------
// Quadrature oracle. Independent of the closed form above: it never touches
// digamma and normalizes with numerically integrated Beta functions rather
// than log_gamma.

struct GaussLegendreRule {
    std::vector<double> node;    // on [0, 1]
    std::vector<double> weight;  // sums to 1
};

// Newton iteration on the Legendre recurrence; standard gauleg construction.
inline GaussLegendreRule gauss_legendre(int n) {
    if (n < 2) throw std::invalid_argument("gauss_legendre: need n >= 2");
    GaussLegendreRule rule;
    rule.node.resize(n);
    rule.weight.resize(n);
    const int m = (n + 1) / 2;
    constexpr double pi = 3.14159265358979323846264338327950288;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.node[i] = 0.5 * (1.0 - x);
        rule.node[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weight[i] = 0.5 * w;
        rule.weight[n - 1 - i] = 0.5 * w;
    }
    return rule;
}

namespace detail {

struct HalfMoments {
    double mass = 0.0;      // integral of z^{a-1}(1-z)^{b-1} over (0, 1/2]
    double ln_near = 0.0;   // same weight against ln z
    double ln_far = 0.0;    // same weight against ln(1-z)
};

// Integrates the Beta weight and its two log moments over (0, 1/2], using
// geometric panels toward the z -> 0 singularity so shapes below one are
// resolved. The GL rule is applied unchanged on every panel. The discarded
// tail below the last panel carries relative mass < 1e-14 inside the oracle
// window, with the |ln z| factor still leaving it under 1e-9 absolute.
inline HalfMoments beta_half_moments(double a, double b, const GaussLegendreRule& rule) {
    constexpr double kPanelRatio = 8.0;
    const double ln_ratio = std::log(kPanelRatio);
    // Descend until z^a <= 1e-14: ln(1/z_min) = 14 ln10 / a.
    int panels = static_cast<int>(std::ceil(14.0 * std::log(10.0) / (a * ln_ratio))) + 1;
    if (panels < 1) panels = 1;
    if (panels > 4000) panels = 4000;

    HalfMoments acc;
    double hi = 0.5;
    for (int k = 0; k < panels; ++k) {
        const double lo = hi / kPanelRatio;
        const double width = hi - lo;
        for (std::size_t i = 0; i < rule.node.size(); ++i) {
            const double z = lo + width * rule.node[i];
            const double lz = std::log(z);
            const double l1mz = std::log1p(-z);
            const double w = std::exp((a - 1.0) * lz + (b - 1.0) * l1mz) * width * rule.weight[i];
            acc.mass += w;
            acc.ln_near += w * lz;
            acc.ln_far += w * l1mz;
        }
        hi = lo;
    }
    return acc;
}

struct BetaMoments {
    double mass = 0.0;
    double ln_z = 0.0;
    double ln_1mz = 0.0;
};

inline BetaMoments beta_moments(double a, double b, const GaussLegendreRule& rule) {
    const HalfMoments left = beta_half_moments(a, b, rule);
    const HalfMoments right = beta_half_moments(b, a, rule);  // mirrored half
    BetaMoments m;
    m.mass = left.mass + right.mass;
    m.ln_z = left.ln_near + right.ln_far;
    m.ln_1mz = left.ln_far + right.ln_near;
    return m;
}

}  // namespace detail

inline constexpr double kQuadShapeMin = 0.05;
inline constexpr double kQuadShapeMax = 200.0;

// Numerical KL(q || p) = Dq_a * E_q[ln z] + Dq_b * E_q[ln(1-z)] + ln B_p - ln B_q
// with every factor obtained by quadrature.
inline double kl_beta_quadrature(const BetaParams& q, const BetaParams& p, int nodes) {
    validate(q, "kl_beta_quadrature");
    validate(p, "kl_beta_quadrature");
    if (nodes < 64) throw std::invalid_argument("kl_beta_quadrature: need nodes >= 64");
    for (double s : {q.alpha, q.beta, p.alpha, p.beta}) {
        if (s < kQuadShapeMin || s > kQuadShapeMax) {
            throw std::domain_error("kl_beta_quadrature: shape outside oracle window [0.05, 200]");
        }
    }
    const GaussLegendreRule rule = gauss_legendre(nodes);
    const detail::BetaMoments mq = detail::beta_moments(q.alpha, q.beta, rule);
    const detail::BetaMoments mp = detail::beta_moments(p.alpha, p.beta, rule);
    return (q.alpha - p.alpha) * mq.ln_z / mq.mass +
           (q.beta - p.beta) * mq.ln_1mz / mq.mass + std::log(mp.mass) - std::log(mq.mass);
}

}  // namespace icrm
