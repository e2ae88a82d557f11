#pragma once

// The variational in-context reward modeling objective: Beta reparameterized
// head scores, the KL-regularized loss with its 1/N schedule, the plain
// Bradley-Terry loss, analytic gradients in (mu, tau) and head space, the
// edge-coefficient diagnostic, and the brute-force interior-optimum search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "icrm/beta.hpp"
#include "icrm/specfun.hpp"

namespace icrm {

struct HeadScores {
    double u_w = 0.0;  // chosen utility
    double u_l = 0.0;  // rejected utility
    double s_w = 0.0;  // chosen confidence logit
    double s_l = 0.0;  // rejected confidence logit
};

struct VariationalOutput {
    double mu = 0.5;
    double tau = 2.0;
    double alpha_q = 1.0;
    double beta_q = 1.0;
};

struct LossConfig {
    double lambda_base = 0.1;
    BetaParams prior{1.0, 1.0};
    int n_demos = 1;
};

struct GradPair {
    double d_mu = 0.0;
    double d_tau = 0.0;
};

struct HeadGrads {
    double d_u_w = 0.0;
    double d_u_l = 0.0;
    double d_s_w = 0.0;
    double d_s_l = 0.0;
};

// mu = sigmoid(u_w - u_l), tau = softplus(s_w) + softplus(s_l) + 1
inline VariationalOutput reparameterize(const HeadScores& h) {
    VariationalOutput v;
    v.mu = sigmoid(h.u_w - h.u_l);
    v.tau = softplus(h.s_w) + softplus(h.s_l) + 1.0;
    v.alpha_q = v.mu * v.tau;
    v.beta_q = (1.0 - v.mu) * v.tau;
    return v;
}

inline VariationalOutput variational_from_mu_tau(double mu, double tau) {
    return VariationalOutput{mu, tau, mu * tau, (1.0 - mu) * tau};
}

// lambda(N) = lambda / N
inline double lambda_schedule(const LossConfig& cfg) {
    if (cfg.n_demos < 1) throw std::invalid_argument("lambda_schedule: n_demos must be >= 1");
    if (cfg.lambda_base < 0.0) throw std::invalid_argument("lambda_schedule: lambda must be >= 0");
    return cfg.lambda_base / static_cast<double>(cfg.n_demos);
}

// L = -(psi(mu tau) - psi(tau)) + lambda(N) KL(Beta(mu tau,(1-mu)tau) || prior)
inline double icrm_loss(const VariationalOutput& v, const LossConfig& cfg) {
    const double lam = lambda_schedule(cfg);
    const double rec = digamma(v.tau) - digamma(v.alpha_q);
    if (lam == 0.0) return rec;
    return rec + lam * kl_beta(BetaParams{v.alpha_q, v.beta_q}, cfg.prior);
}

// -log sigmoid(delta_r)
inline double bt_loss(double delta_r) { return softplus(-delta_r); }

// Analytic d/d mu and d/d tau of icrm_loss; lambda enters post-schedule.
inline GradPair grad_mu_tau(const VariationalOutput& v, const LossConfig& cfg) {
    const double lam = lambda_schedule(cfg);
    const double a = v.alpha_q;
    const double b = v.beta_q;
    const double psi1_a = trigamma(a);
    const double psi1_tau = trigamma(v.tau);
    GradPair g;
    g.d_mu = -v.tau * psi1_a;
    g.d_tau = -v.mu * psi1_a + psi1_tau;
    if (lam != 0.0) {
        const double psi1_b = trigamma(b);
        const double da = a - cfg.prior.alpha;
        const double db = b - cfg.prior.beta;
        const double dt = v.tau - cfg.prior.alpha - cfg.prior.beta;
        g.d_mu += lam * v.tau * (da * psi1_a - db * psi1_b);
        g.d_tau += lam * (v.mu * da * psi1_a + (1.0 - v.mu) * db * psi1_b - dt * psi1_tau);
    }
    return g;
}

// Chain rule through the reparameterization: d mu/d(u_w - u_l) = mu(1-mu),
// d tau/d s = sigmoid(s).
inline HeadGrads grad_heads(const HeadScores& h, const LossConfig& cfg) {
    const VariationalOutput v = reparameterize(h);
    const GradPair g = grad_mu_tau(v, cfg);
    HeadGrads out;
    const double d_delta = g.d_mu * v.mu * (1.0 - v.mu);
    out.d_u_w = d_delta;
    out.d_u_l = -d_delta;
    out.d_s_w = g.d_tau * sigmoid(h.s_w);
    out.d_s_l = g.d_tau * sigmoid(h.s_l);
    return out;
}

// --------------------------------------------------------------------------
// Edge behavior at finite confidence: as eps = 1 - mu -> 0 the loss gradient
// approaches (lambda beta0 / (eps tau)) d(delta u) - (lambda beta0 / (eps tau^2)) d(tau).

struct EdgeCheckRow {
    double epsilon = 0.0;
    double utility_measured = 0.0;     // eps * dL/d(delta u) at mu = 1 - eps
    double utility_predicted = 0.0;    // lambda * beta0 / tau
    double confidence_measured = 0.0;  // eps * dL/d tau
    double confidence_predicted = 0.0; // -lambda * beta0 / tau^2
};

inline std::vector<EdgeCheckRow> edge_coefficient_check(double tau, double lambda,
                                                        const BetaParams& prior,
                                                        const std::vector<double>& epsilons) {
    if (!(tau > 1.0)) throw std::invalid_argument("edge_coefficient_check: tau must exceed 1");
    if (lambda < 0.0) throw std::invalid_argument("edge_coefficient_check: lambda must be >= 0");
    validate(prior, "edge_coefficient_check");
    for (std::size_t i = 1; i < epsilons.size(); ++i) {
        if (!(epsilons[i] < epsilons[i - 1])) {
            throw std::invalid_argument("edge_coefficient_check: epsilons must be sorted descending");
        }
    }
    const LossConfig cfg{lambda, prior, 1};
    std::vector<EdgeCheckRow> rows;
    rows.reserve(epsilons.size());
    for (double eps : epsilons) {
        if (!(eps > 0.0) || !(eps < 0.01) || 1.0 - eps == 1.0) {
            throw std::domain_error("edge_coefficient_check: epsilon outside representable (0, 0.01)");
        }
        const double mu = 1.0 - eps;
        const GradPair g = grad_mu_tau(variational_from_mu_tau(mu, tau), cfg);
        EdgeCheckRow row;
        row.epsilon = eps;
        // mu(1-mu) written as mu*eps so the factor stays exact for tiny eps.
        row.utility_measured = eps * g.d_mu * mu * eps;
        row.utility_predicted = lambda * prior.beta / tau;
        row.confidence_measured = eps * g.d_tau;
        row.confidence_predicted = -lambda * prior.beta / (tau * tau);
        rows.push_back(row);
    }
    return rows;
}

// --------------------------------------------------------------------------
// Interior optimum (brute-force grid in (logit mu, log tau) plus a shrinking
// pattern search). The grid IS the oracle: boundary-band minima are reported
// so callers can confirm the minimizer beats every edge of the search box.

enum class OptimumStatus { interior, tau_at_cap, mu_at_edge };

struct InteriorOptimum {
    double mu = 0.0;
    double tau = 0.0;
    double loss = 0.0;
    OptimumStatus status = OptimumStatus::interior;
    // min loss over the four outermost grid bands: mu-low, mu-high, tau-low, tau-high
    std::array<double, 4> boundary_band_min{};
};

namespace detail {

inline double loss_at_logits(double lmu, double ltau, const LossConfig& cfg) {
    const double mu = sigmoid(lmu);
    const double tau = std::exp(ltau);
    return icrm_loss(variational_from_mu_tau(mu, tau), cfg);
}

}  // namespace detail

inline InteriorOptimum interior_optimum(const LossConfig& cfg, int grid_mu, int grid_tau,
                                        double tau_max) {
    if (lambda_schedule(cfg) <= 0.0) {
        throw std::invalid_argument("interior_optimum: theorem hypotheses need lambda(N) > 0");
    }
    if (grid_mu < 200 || grid_tau < 200) {
        throw std::invalid_argument("interior_optimum: grids must be >= 200");
    }
    if (!(tau_max >= 100.0)) {
        throw std::invalid_argument("interior_optimum: tau_max must be >= 100");
    }

    const double mu_edge = 1e-5;
    const double lmu_lo = logit(mu_edge);
    const double lmu_hi = -lmu_lo;
    const double ltau_lo = std::log(1e-3);
    const double ltau_hi = std::log(tau_max);

    double best = std::numeric_limits<double>::infinity();
    double best_tau = 0.0, best_mu = 0.0;
    double best_lmu = 0.0, best_ltau = 0.0;
    std::array<double, 4> band_min;
    band_min.fill(std::numeric_limits<double>::infinity());
    const int band_mu = std::max(2, grid_mu / 20);
    const int band_tau = std::max(2, grid_tau / 20);

    for (int t = 0; t < grid_tau; ++t) {
        const double ltau = ltau_lo + (ltau_hi - ltau_lo) * t / (grid_tau - 1);
        const double tau = std::exp(ltau);
        for (int m = 0; m < grid_mu; ++m) {
            const double lmu = lmu_lo + (lmu_hi - lmu_lo) * m / (grid_mu - 1);
            const double mu = sigmoid(lmu);
            const double L = icrm_loss(variational_from_mu_tau(mu, tau), cfg);
            // tie-break: smaller tau, then smaller mu
            if (L < best || (L == best && (tau < best_tau || (tau == best_tau && mu < best_mu)))) {
                best = L;
                best_mu = mu;
                best_tau = tau;
                best_lmu = lmu;
                best_ltau = ltau;
            }
            if (m < band_mu) band_min[0] = std::fmin(band_min[0], L);
            if (m >= grid_mu - band_mu) band_min[1] = std::fmin(band_min[1], L);
            if (t < band_tau) band_min[2] = std::fmin(band_min[2], L);
            if (t >= grid_tau - band_tau) band_min[3] = std::fmin(band_min[3], L);
        }
    }

    // Local descent: shrinking 5x5 pattern search in the transformed coords.
    double step_mu = (lmu_hi - lmu_lo) / (grid_mu - 1);
    double step_tau = (ltau_hi - ltau_lo) / (grid_tau - 1);
    double clmu = best_lmu, cltau = best_ltau;
    for (int it = 0; it < 90; ++it) {
        bool moved = false;
        for (int dm = -2; dm <= 2; ++dm) {
            for (int dt = -2; dt <= 2; ++dt) {
                if (dm == 0 && dt == 0) continue;
                const double lmu = std::clamp(clmu + dm * step_mu, lmu_lo, lmu_hi);
                const double ltau = std::clamp(cltau + dt * step_tau, ltau_lo, ltau_hi);
                const double L = detail::loss_at_logits(lmu, ltau, cfg);
                if (L < best) {
                    best = L;
                    clmu = lmu;
                    cltau = ltau;
                    moved = true;
                }
            }
        }
        if (!moved) {
            step_mu *= 0.55;
            step_tau *= 0.55;
            if (step_mu < 1e-12 && step_tau < 1e-12) break;
        }
    }
    best_mu = sigmoid(clmu);
    best_tau = std::exp(cltau);

    InteriorOptimum out;
    out.mu = best_mu;
    out.tau = best_tau;
    out.loss = best;
    out.boundary_band_min = band_min;
    if (best_tau > 0.9 * tau_max) {
        out.status = OptimumStatus::tau_at_cap;
    } else if (best_mu < 1e-3 || best_mu > 1.0 - 1e-3) {
        out.status = OptimumStatus::mu_at_edge;
    } else {
        out.status = OptimumStatus::interior;
    }
    return out;
}

}  // namespace icrm
