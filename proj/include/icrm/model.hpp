#pragma once

// Context-conditioned amortized head. The aggregator is a single linear map
// over the context's mean preference direction; the confidence head sees only
// (agreement, log(1+N), 1). Training is plain SGD with momentum on manually
// derived gradients.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrm/objective.hpp"
#include "icrm/rng.hpp"
#include "icrm/synth.hpp"

namespace icrm {

struct ModelParams {
    int dim = 0;
    std::vector<double> w_agg;     // dim x dim, row-major
    std::vector<double> b_agg;     // dim
    std::array<double, 3> w_conf;  // over (agreement, log(1+N), 1)
};

inline ModelParams init_params(int dim, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("init_params: dim must be >= 2");
    ModelParams p;
    p.dim = dim;
    Rng rng(mix_seed(seed, 0x1417, static_cast<std::uint64_t>(dim)));
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim) + 1.0);
    p.w_agg.resize(static_cast<std::size_t>(dim) * dim);
    for (auto& w : p.w_agg) w = sd * rng.normal();
    p.b_agg.resize(dim);
    for (auto& b : p.b_agg) b = sd * rng.normal();
    p.w_conf = {0.0, 0.0, 0.0};
    return p;
}

namespace detail {

inline void check_dim(const ModelParams& p, std::size_t got, const char* what) {
    if (got != static_cast<std::size_t>(p.dim)) {
        throw std::invalid_argument(std::string("model: ") + what + " dimension " +
                                    std::to_string(got) + " does not match model dim " +
                                    std::to_string(p.dim));
    }
}

}  // namespace detail

// Mean sign-corrected preference direction of the context.
inline std::vector<double> context_direction(const ModelParams& p, const DemonstrationSet& ctx) {
    if (ctx.triples.empty()) throw std::invalid_argument("context_direction: empty context");
    std::vector<double> c(p.dim, 0.0);
    for (const auto& t : ctx.triples) {
        detail::check_dim(p, t.phi_chosen.size(), "context triple");
        detail::check_dim(p, t.phi_rejected.size(), "context triple");
        const double sign = t.outcome == 1 ? 1.0 : -1.0;
        for (int i = 0; i < p.dim; ++i) c[i] += sign * (t.phi_chosen[i] - t.phi_rejected[i]);
    }
    for (auto& x : c) x /= static_cast<double>(ctx.triples.size());
    return c;
}

inline std::array<double, 3> confidence_features(const DemonstrationSet& ctx) {
    return {ctx.agreement, std::log1p(static_cast<double>(ctx.triples.size())), 1.0};
}

inline double confidence_logit(const ModelParams& p, const DemonstrationSet& ctx) {
    const auto f = confidence_features(ctx);
    return p.w_conf[0] * f[0] + p.w_conf[1] * f[1] + p.w_conf[2] * f[2];
}

// g = W * c + b; u_y = <g, phi_y>; s_w = s_l = <w_conf, features>.
inline HeadScores forward(const ModelParams& p, const DemonstrationSet& ctx,
                          const PreferenceTriple& pair) {
    detail::check_dim(p, pair.phi_chosen.size(), "candidate");
    detail::check_dim(p, pair.phi_rejected.size(), "candidate");
    const std::vector<double> c = context_direction(p, ctx);
    HeadScores h;
    double u_w = 0.0, u_l = 0.0;
    for (int i = 0; i < p.dim; ++i) {
        double g = p.b_agg[i];
        const double* row = &p.w_agg[static_cast<std::size_t>(i) * p.dim];
        for (int j = 0; j < p.dim; ++j) g += row[j] * c[j];
        u_w += g * pair.phi_chosen[i];
        u_l += g * pair.phi_rejected[i];
    }
    h.u_w = u_w;
    h.u_l = u_l;
    h.s_w = h.s_l = confidence_logit(p, ctx);
    return h;
}

// R(x, y, C) = softplus(s) * u for a single candidate.
inline double score_single(const ModelParams& p, const DemonstrationSet& ctx,
                           const std::vector<double>& phi_prompt,
                           const std::vector<double>& phi_candidate) {
    detail::check_dim(p, phi_prompt.size(), "prompt");
    detail::check_dim(p, phi_candidate.size(), "candidate");
    const std::vector<double> c = context_direction(p, ctx);
    double u = 0.0;
    for (int i = 0; i < p.dim; ++i) {
        double g = p.b_agg[i];
        const double* row = &p.w_agg[static_cast<std::size_t>(i) * p.dim];
        for (int j = 0; j < p.dim; ++j) g += row[j] * c[j];
        u += g * phi_candidate[i];
    }
    return softplus(confidence_logit(p, ctx)) * u;
}

// --------------------------------------------------------------------------
// Training

enum class TrainObjective { icrm, bt };

struct ModelGrad {
    std::vector<double> w_agg;
    std::vector<double> b_agg;
    std::array<double, 3> w_conf{0.0, 0.0, 0.0};
};

struct BackwardResult {
    double loss = 0.0;
    double mu = 0.5;
    double tau = 0.0;
    ModelGrad grad;
};

// Gradient of icrm_loss(reparameterize(forward(...))) w.r.t. every parameter.
inline BackwardResult backward(const ModelParams& p, const DemonstrationSet& ctx,
                               const PreferenceTriple& pair, const LossConfig& cfg) {
    const HeadScores h = forward(p, ctx, pair);
    const VariationalOutput v = reparameterize(h);
    const HeadGrads hg = grad_heads(h, cfg);
    const std::vector<double> c = context_direction(p, ctx);

    BackwardResult out;
    out.loss = icrm_loss(v, cfg);
    out.mu = v.mu;
    out.tau = v.tau;
    out.grad.w_agg.assign(static_cast<std::size_t>(p.dim) * p.dim, 0.0);
    out.grad.b_agg.assign(p.dim, 0.0);

    // dL/dg_i = d_u_w * (phi_w - phi_l)_i; dL/dW = dL/dg c^T; dL/db = dL/dg
    for (int i = 0; i < p.dim; ++i) {
        const double dg = hg.d_u_w * (pair.phi_chosen[i] - pair.phi_rejected[i]);
        out.grad.b_agg[i] = dg;
        double* row = &out.grad.w_agg[static_cast<std::size_t>(i) * p.dim];
        for (int j = 0; j < p.dim; ++j) row[j] = dg * c[j];
    }
    const double ds = hg.d_s_w + hg.d_s_l;  // shared confidence logit
    const auto f = confidence_features(ctx);
    out.grad.w_conf = {ds * f[0], ds * f[1], ds * f[2]};
    return out;
}

struct TrainTraceRecord {
    int step = 0;
    double loss = 0.0;
    double mu_mean = 0.0;
    double tau_mean = 0.0;
};

using TrainTrace = std::vector<TrainTraceRecord>;

enum class TrainStatus { ok, diverged };

struct TrainConfig {
    int dim = 16;
    double margin_scale = 2.0;
    std::vector<int> n_choices = {1, 2, 4, 8, 16};
    // ICRM meta-training draws a fresh latent objective per instance; the BT
    // reference model trains on one fixed world like a classifier RM.
    bool fresh_objective_per_instance = true;

    TrainObjective objective = TrainObjective::icrm;
    double lambda_base = 0.1;
    BetaParams prior{1.0, 1.0};

    int steps = 2000;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct TrainResult {
    ModelParams params;
    TrainTrace trace;
    TrainStatus status = TrainStatus::ok;
    int abort_step = -1;
};

inline TrainResult train(const TrainConfig& cfg) {
    if (cfg.steps < 1 || cfg.batch_size < 1) {
        throw std::invalid_argument("train: steps and batch_size must be >= 1");
    }
    if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate < 0");
    if (cfg.n_choices.empty()) throw std::invalid_argument("train: n_choices empty");

    const bool bt = cfg.objective == TrainObjective::bt;
    TrainResult res;
    res.params = init_params(cfg.dim, mix_seed(cfg.seed, 0x111));
    if (bt) {
        // Context-free reference scorer: aggregator and confidence pinned to zero.
        std::fill(res.params.w_agg.begin(), res.params.w_agg.end(), 0.0);
        res.params.w_conf = {0.0, 0.0, 0.0};
    }
    const ObjectiveVector fixed_world =
        gen_objective(cfg.dim, mix_seed(cfg.seed, 0x2222));

    const std::size_t nw = res.params.w_agg.size();
    std::vector<double> vel_w(nw, 0.0), vel_b(cfg.dim, 0.0);
    std::array<double, 3> vel_conf{0.0, 0.0, 0.0};
    std::vector<double> grad_w(nw), grad_b(cfg.dim);
    std::array<double, 3> grad_conf{};

    res.trace.reserve(cfg.steps);
    Rng pick(mix_seed(cfg.seed, 0x3333));
    const double inv_batch = 1.0 / cfg.batch_size;

    for (int step = 1; step <= cfg.steps; ++step) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        grad_conf = {0.0, 0.0, 0.0};
        double loss_acc = 0.0, mu_acc = 0.0, tau_acc = 0.0;

        for (int item = 0; item < cfg.batch_size; ++item) {
            const std::uint64_t inst = mix_seed(cfg.seed, static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(item));
            const ObjectiveVector obj = cfg.fresh_objective_per_instance
                                            ? gen_objective(cfg.dim, inst)
                                            : fixed_world;
            const int n = cfg.n_choices[pick.below(cfg.n_choices.size())];
            const DemonstrationSet ctx =
                build_context(obj, n, cfg.margin_scale, mix_seed(inst, 0xC471));
            const PreferenceTriple pair =
                sample_triple(obj, cfg.margin_scale, mix_seed(inst, 0xE7A1));

            if (bt) {
                const HeadScores h = forward(res.params, ctx, pair);
                const double delta = h.u_w - h.u_l;
                loss_acc += bt_loss(delta);
                mu_acc += sigmoid(delta);
                tau_acc += reparameterize(h).tau;
                const double d_delta = -sigmoid(-delta);  // d(-log sigmoid)/d delta
                for (int i = 0; i < cfg.dim; ++i) {
                    grad_b[i] += d_delta * (pair.phi_chosen[i] - pair.phi_rejected[i]);
                }
            } else {
                const LossConfig loss_cfg{cfg.lambda_base, cfg.prior, n};
                const BackwardResult bw = backward(res.params, ctx, pair, loss_cfg);
                loss_acc += bw.loss;
                mu_acc += bw.mu;
                tau_acc += bw.tau;
                for (std::size_t i = 0; i < nw; ++i) grad_w[i] += bw.grad.w_agg[i];
                for (int i = 0; i < cfg.dim; ++i) grad_b[i] += bw.grad.b_agg[i];
                for (int i = 0; i < 3; ++i) grad_conf[i] += bw.grad.w_conf[i];
            }
        }

        const double mean_loss = loss_acc * inv_batch;
        res.trace.push_back({step, mean_loss, mu_acc * inv_batch, tau_acc * inv_batch});
        if (!std::isfinite(mean_loss)) {
            res.status = TrainStatus::diverged;
            res.abort_step = step;
            return res;
        }

        if (!bt) {
            for (std::size_t i = 0; i < nw; ++i) {
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * grad_w[i] * inv_batch;
                res.params.w_agg[i] += vel_w[i];
            }
            for (int i = 0; i < 3; ++i) {
                vel_conf[i] = cfg.momentum * vel_conf[i] - cfg.learning_rate * grad_conf[i] * inv_batch;
                res.params.w_conf[i] += vel_conf[i];
            }
        }
        for (int i = 0; i < cfg.dim; ++i) {
            vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * grad_b[i] * inv_batch;
            res.params.b_agg[i] += vel_b[i];
        }
    }
    return res;
}

}  // namespace icrm
