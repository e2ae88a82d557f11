#pragma once

// Runnable invariant suite behind the `verify` subcommand: special-function
// recurrences and finite-difference cross-checks, closed-form KL vs the
// quadrature oracle, analytic gradients vs central differences, the
// edge-coefficient limit, and the interior-optimum sweep. Each check names
// the violated invariant and the offending inputs on failure.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "icrm/beta.hpp"
#include "icrm/model.hpp"
#include "icrm/objective.hpp"
#include "icrm/rng.hpp"
#include "icrm/specfun.hpp"

namespace icrm {

struct CheckResult {
    std::string name;
    bool pass = true;
    std::string detail;
};

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_gap(double got, double want, double abs_floor) {
    const double denom = std::fmax(std::fabs(want), abs_floor / 1e-5);
    return std::fabs(got - want) / denom;
}

namespace verify_detail {

inline std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(12);
    ss << x;
    return ss.str();
}

template <typename F>
inline CheckResult sweep(const std::string& name, int count, F&& body) {
    CheckResult res{name, true, ""};
    for (int i = 0; i < count; ++i) {
        std::string why = body(i);
        if (!why.empty()) {
            res.pass = false;
            res.detail = why;
            return res;
        }
    }
    res.detail = "ok over " + std::to_string(count) + " samples";
    return res;
}

}  // namespace verify_detail

// Digamma/trigamma/tetragamma recurrences plus the softplus/sigmoid
// identities on log-uniform samples of x in [1e-3, 1e3].
inline CheckResult check_specfun_recurrences(std::uint64_t seed, int count = 1000) {
    Rng rng(mix_seed(seed, 0x51));
    return verify_detail::sweep("specfun.recurrences", count, [&](int) -> std::string {
        const double x = std::exp(std::log(1e-3) + rng.uniform01() * std::log(1e6));
        const double lg = log_gamma(x + 1.0) - (log_gamma(x) + std::log(x));
        if (std::fabs(lg) > 1e-12 * std::fmax(1.0, std::fabs(log_gamma(x + 1.0)))) {
            return "log_gamma recurrence broke at x=" + verify_detail::fmt(x);
        }
        if (std::fabs(digamma(x + 1.0) - (digamma(x) + 1.0 / x)) > 1e-12) {
            return "digamma recurrence broke at x=" + verify_detail::fmt(x);
        }
        if (std::fabs(trigamma(x + 1.0) - (trigamma(x) - 1.0 / (x * x))) > 1e-10) {
            return "trigamma recurrence broke at x=" + verify_detail::fmt(x);
        }
        if (!(trigamma(x) > 0.0)) return "trigamma not positive at x=" + verify_detail::fmt(x);
        const double t = tetragamma(x + 1.0) - (tetragamma(x) + 2.0 / (x * x * x));
        if (std::fabs(t) > 1e-9 * std::fmax(1.0, std::fabs(tetragamma(x)))) {
            return "tetragamma recurrence broke at x=" + verify_detail::fmt(x);
        }
        if (!(tetragamma(x) < 0.0)) return "tetragamma not negative at x=" + verify_detail::fmt(x);
        const double u = 20.0 * (rng.uniform01() - 0.5);
        if (std::fabs(sigmoid(u) + sigmoid(-u) - 1.0) > 1e-15) {
            return "sigmoid symmetry broke at x=" + verify_detail::fmt(u);
        }
        if (std::fabs(softplus(u) - softplus(-u) - u) > 1e-12) {
            return "softplus identity broke at x=" + verify_detail::fmt(u);
        }
        return "";
    });
}

// digamma against the central difference of log_gamma, trigamma against the
// central difference of digamma, on x in [0.1, 100].
inline CheckResult check_specfun_derivatives(std::uint64_t seed, int count = 300) {
    Rng rng(mix_seed(seed, 0x52));
    return verify_detail::sweep("specfun.finite_differences", count, [&](int) -> std::string {
        const double x = std::exp(std::log(0.1) + rng.uniform01() * std::log(1000.0));
        const double h = 1e-5;
        const double fd_psi = central_diff([](double t) { return log_gamma(t); }, x, h);
        if (rel_gap(digamma(x), fd_psi, 1e-8) > 1e-6) {
            return "digamma vs d(log_gamma) broke at x=" + verify_detail::fmt(x);
        }
        const double fd_psi1 = central_diff([](double t) { return digamma(t); }, x, h);
        if (rel_gap(trigamma(x), fd_psi1, 1e-8) > 1e-6) {
            return "trigamma vs d(digamma) broke at x=" + verify_detail::fmt(x);
        }
        return "";
    });
}

// Closed-form Beta KL vs the 256-node quadrature oracle on shapes in [0.1, 50].
inline CheckResult check_kl_quadrature(std::uint64_t seed, int count = 500, int nodes = 256,
                                       double tol = 1e-7) {
    Rng rng(mix_seed(seed, 0x53));
    auto shape = [&]() { return std::exp(std::log(0.1) + rng.uniform01() * std::log(500.0)); };
    return verify_detail::sweep("beta.kl_quadrature_agreement", count, [&](int) -> std::string {
        const BetaParams q{shape(), shape()};
        const BetaParams p{shape(), shape()};
        const double closed = kl_beta(q, p);
        const double quad = kl_beta_quadrature(q, p, nodes);
        if (!(closed >= 0.0)) {
            return "kl_beta negative at q=(" + verify_detail::fmt(q.alpha) + "," +
                   verify_detail::fmt(q.beta) + ")";
        }
        if (std::fabs(closed - quad) > tol) {
            return "kl closed-form vs quadrature gap " + verify_detail::fmt(closed - quad) +
                   " at q=(" + verify_detail::fmt(q.alpha) + "," + verify_detail::fmt(q.beta) +
                   ") p=(" + verify_detail::fmt(p.alpha) + "," + verify_detail::fmt(p.beta) + ")";
        }
        return "";
    });
}

// Appendix-style analytic gradients vs central differences of the loss.
inline CheckResult check_gradients(std::uint64_t seed, int count = 200) {
    Rng rng(mix_seed(seed, 0x54));
    return verify_detail::sweep("objective.gradient_check", count, [&](int) -> std::string {
        const double mu = 0.05 + 0.9 * rng.uniform01();
        const double tau = 1.1 + 58.9 * rng.uniform01();
        const double lam = std::exp(std::log(0.01) + rng.uniform01() * std::log(100.0));
        const BetaParams prior{0.5 + 4.5 * rng.uniform01(), 0.5 + 4.5 * rng.uniform01()};
        const LossConfig cfg{lam, prior, 1};
        const GradPair g = grad_mu_tau(variational_from_mu_tau(mu, tau), cfg);
        const double h = 1e-6;
        const double fd_mu = central_diff(
            [&](double m) { return icrm_loss(variational_from_mu_tau(m, tau), cfg); }, mu, h);
        const double fd_tau = central_diff(
            [&](double t) { return icrm_loss(variational_from_mu_tau(mu, t), cfg); }, tau, h);
        if (rel_gap(g.d_mu, fd_mu, 1e-8) > 1e-5 || rel_gap(g.d_tau, fd_tau, 1e-8) > 1e-5) {
            return "grad_mu_tau vs finite differences broke at mu=" + verify_detail::fmt(mu) +
                   " tau=" + verify_detail::fmt(tau) + " lambda=" + verify_detail::fmt(lam);
        }
        const HeadScores hs{2.0 * (rng.uniform01() - 0.5), 2.0 * (rng.uniform01() - 0.5),
                            2.0 * (rng.uniform01() - 0.5), 2.0 * (rng.uniform01() - 0.5)};
        const HeadGrads hg = grad_heads(hs, cfg);
        auto loss_of = [&](HeadScores v) { return icrm_loss(reparameterize(v), cfg); };
        const double fd_uw = central_diff(
            [&](double u) { HeadScores v = hs; v.u_w = u; return loss_of(v); }, hs.u_w, h);
        const double fd_sw = central_diff(
            [&](double s) { HeadScores v = hs; v.s_w = s; return loss_of(v); }, hs.s_w, h);
        if (rel_gap(hg.d_u_w, fd_uw, 1e-8) > 1e-5 || rel_gap(hg.d_s_w, fd_sw, 1e-8) > 1e-5) {
            return "grad_heads vs finite differences broke at u_w=" + verify_detail::fmt(hs.u_w);
        }
        if (hg.d_u_w + hg.d_u_l != 0.0) {
            return "head utility gradients not antisymmetric";
        }
        return "";
    });
}

// Full model backward vs central differences on every parameter.
inline CheckResult check_model_backward(std::uint64_t seed, int count = 50) {
    Rng rng(mix_seed(seed, 0x55));
    return verify_detail::sweep("model.backward_check", count, [&](int i) -> std::string {
        const int dim = 4 + static_cast<int>(rng.below(4));
        ModelParams params = init_params(dim, mix_seed(seed, 0x66, i));
        for (auto& w : params.w_conf) w = 0.5 * rng.normal();
        const ObjectiveVector obj = gen_objective(dim, mix_seed(seed, 0x67, i));
        const int n = 1 + static_cast<int>(rng.below(8));
        const DemonstrationSet ctx = build_context(obj, n, 2.0, mix_seed(seed, 0x68, i));
        const PreferenceTriple pair = sample_triple(obj, 2.0, mix_seed(seed, 0x69, i));
        const LossConfig cfg{0.05 + rng.uniform01(), BetaParams{1.0, 1.0}, n};

        const BackwardResult bw = backward(params, ctx, pair, cfg);
        auto loss_at = [&](const ModelParams& p) {
            return icrm_loss(reparameterize(forward(p, ctx, pair)), cfg);
        };
        const double h = 1e-6;
        auto probe = [&](double* slot, double analytic, const char* what) -> std::string {
            const double keep = *slot;
            *slot = keep + h;
            const double up = loss_at(params);
            *slot = keep - h;
            const double dn = loss_at(params);
            *slot = keep;
            const double fd = (up - dn) / (2.0 * h);
            if (rel_gap(analytic, fd, 1e-7) > 1e-4) {
                return std::string("backward mismatch on ") + what + " (analytic " +
                       verify_detail::fmt(analytic) + " vs fd " + verify_detail::fmt(fd) + ")";
            }
            return "";
        };
        const std::size_t wi = rng.below(params.w_agg.size());
        if (auto e = probe(&params.w_agg[wi], bw.grad.w_agg[wi], "w_agg"); !e.empty()) return e;
        const std::size_t bi = rng.below(params.b_agg.size());
        if (auto e = probe(&params.b_agg[bi], bw.grad.b_agg[bi], "b_agg"); !e.empty()) return e;
        const std::size_t ci = rng.below(3);
        if (auto e = probe(&params.w_conf[ci], bw.grad.w_conf[ci], "w_conf"); !e.empty()) return e;
        return "";
    });
}

// Edge coefficients approach lambda*beta0/tau and -lambda*beta0/tau^2 with
// monotonically shrinking deviation.
inline CheckResult check_edge_coefficients() {
    CheckResult res{"objective.edge_coefficients", true, ""};
    const std::vector<double> eps{1e-3, 1e-4, 1e-5, 1e-6};
    const auto rows = edge_coefficient_check(3.0, 0.1, BetaParams{1.0, 1.0}, eps);
    double prev_u = 1e300, prev_c = 1e300;
    for (const auto& r : rows) {
        const double dev_u = std::fabs(r.utility_measured - r.utility_predicted) /
                             std::fabs(r.utility_predicted);
        const double dev_c = std::fabs(r.confidence_measured - r.confidence_predicted) /
                             std::fabs(r.confidence_predicted);
        if (dev_u >= prev_u || dev_c >= prev_c) {
            res.pass = false;
            res.detail = "deviation not decreasing at eps=" + verify_detail::fmt(r.epsilon);
            return res;
        }
        prev_u = dev_u;
        prev_c = dev_c;
    }
    const auto& last = rows.back();
    const double dev_u =
        std::fabs(last.utility_measured - last.utility_predicted) / last.utility_predicted;
    const double dev_c = std::fabs(last.confidence_measured - last.confidence_predicted) /
                         std::fabs(last.confidence_predicted);
    if (dev_u > 1e-3 || dev_c > 1e-3) {
        res.pass = false;
        res.detail = "edge coefficient off at eps=1e-6: utility dev " + verify_detail::fmt(dev_u) +
                     ", confidence dev " + verify_detail::fmt(dev_c);
        return res;
    }
    res.detail = "limit coefficients matched to " + verify_detail::fmt(std::fmax(dev_u, dev_c));
    return res;
}

// Interior minimizers for the theorem's lambda grid, with boundary bands
// strictly above the minimum.
inline CheckResult check_interior_optimum(int grid = 400, double tau_max = 200.0) {
    CheckResult res{"objective.interior_optimum", true, ""};
    for (double lam : {0.01, 0.1, 0.5, 1.0}) {
        const LossConfig cfg{lam, BetaParams{1.0, 1.0}, 1};
        const InteriorOptimum opt = interior_optimum(cfg, grid, grid, tau_max);
        if (opt.status != OptimumStatus::interior || opt.tau > 0.9 * tau_max ||
            opt.mu < 1e-3 || opt.mu > 1.0 - 1e-3) {
            res.pass = false;
            res.detail = "minimizer not interior at lambda=" + verify_detail::fmt(lam);
            return res;
        }
        for (double band : opt.boundary_band_min) {
            if (!(band > opt.loss)) {
                res.pass = false;
                res.detail = "boundary band not above minimum at lambda=" + verify_detail::fmt(lam);
                return res;
            }
        }
    }
    res.detail = "interior for lambda in {0.01, 0.1, 0.5, 1.0}";
    return res;
}

inline std::vector<CheckResult> run_verification(std::uint64_t seed) {
    std::vector<CheckResult> results;
    results.push_back(check_specfun_recurrences(seed));
    results.push_back(check_specfun_derivatives(seed));
    results.push_back(check_kl_quadrature(seed));
    results.push_back(check_gradients(seed));
    results.push_back(check_model_backward(seed));
    results.push_back(check_edge_coefficients());
    results.push_back(check_interior_optimum());
    return results;
}

}  // namespace icrm
