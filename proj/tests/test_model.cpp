#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "icrm/eval.hpp"
#include "icrm/io.hpp"
#include "icrm/model.hpp"

using namespace icrm;

namespace {

ModelParams identity_model(int dim) {
    ModelParams p;
    p.dim = dim;
    p.w_agg.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) p.w_agg[static_cast<std::size_t>(i) * dim + i] = 1.0;
    p.b_agg.assign(dim, 0.0);
    p.w_conf = {0.0, 0.0, 0.0};
    return p;
}

PreferenceTriple axis_triple(int dim, int axis) {
    PreferenceTriple t;
    t.phi_prompt.assign(dim, 0.0);
    t.phi_chosen.assign(dim, 0.0);
    t.phi_rejected.assign(dim, 0.0);
    t.phi_chosen[axis] = 1.0;
    t.phi_rejected[axis] = -1.0;
    t.outcome = 1;
    return t;
}

}  // namespace

TEST_CASE("forward on hand-built inputs") {
    const int d = 4;
    const ModelParams p = identity_model(d);
    DemonstrationSet ctx;
    ctx.triples.push_back(axis_triple(d, 0));  // delta phi = 2 e_0
    ctx.triples.back().phi_rejected.assign(d, 0.0);  // make delta exactly e_0
    ctx.agreement = 1.0;

    const PreferenceTriple pair = axis_triple(d, 0);
    const HeadScores h = forward(p, ctx, pair);
    CHECK(h.u_w == Catch::Approx(1.0).margin(1e-15));
    CHECK(h.u_l == Catch::Approx(-1.0).margin(1e-15));
    CHECK(reparameterize(h).mu == Catch::Approx(sigmoid(2.0)).margin(1e-15));

    // empty-effect context: all delta phi zero
    DemonstrationSet null_ctx;
    PreferenceTriple z;
    z.phi_prompt.assign(d, 0.0);
    z.phi_chosen.assign(d, 0.5);
    z.phi_rejected.assign(d, 0.5);
    null_ctx.triples.push_back(z);
    const HeadScores h0 = forward(p, null_ctx, pair);
    CHECK(h0.u_w == 0.0);
    CHECK(h0.u_l == 0.0);
    CHECK(reparameterize(h0).mu == 0.5);

    // confidence head reads (agreement, log(1+N), 1)
    ModelParams pc = identity_model(d);
    pc.w_conf = {0.0, 1.0, 0.0};
    DemonstrationSet ctx7;
    for (int i = 0; i < 7; ++i) ctx7.triples.push_back(axis_triple(d, i % d));
    const HeadScores h7 = forward(pc, ctx7, pair);
    CHECK(h7.s_w == Catch::Approx(std::log(8.0)).margin(1e-15));
    CHECK(h7.s_l == h7.s_w);

    PreferenceTriple bad = pair;
    bad.phi_chosen.resize(3);
    CHECK_THROWS_AS(forward(p, ctx, bad), std::invalid_argument);
}

TEST_CASE("pair antisymmetry: swap maps mu to 1 - mu") {
    const ObjectiveVector w = gen_objective(8, 17);
    const ModelParams p = init_params(8, 4);
    const DemonstrationSet ctx = build_context(w, 8, 2.0, 11);
    for (int i = 0; i < 50; ++i) {
        PreferenceTriple t = sample_triple(w, 2.0, i);
        const double mu = reparameterize(forward(p, ctx, t)).mu;
        std::swap(t.phi_chosen, t.phi_rejected);
        const double mu_swapped = reparameterize(forward(p, ctx, t)).mu;
        REQUIRE(std::fabs(mu_swapped - (1.0 - mu)) <= 1e-15);
    }
}

TEST_CASE("context order invariance") {
    const ObjectiveVector w = gen_objective(8, 23);
    const ModelParams p = init_params(8, 5);
    DemonstrationSet ctx = build_context(w, 12, 2.0, 13);
    const PreferenceTriple pair = sample_triple(w, 2.0, 500);
    const HeadScores h = forward(p, ctx, pair);
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        for (int i = 11; i > 0; --i) {
            std::swap(ctx.triples[i], ctx.triples[rng.below(i + 1)]);
        }
        const HeadScores hp = forward(p, ctx, pair);
        REQUIRE(hp.u_w == Catch::Approx(h.u_w).margin(1e-12));
        REQUIRE(hp.u_l == Catch::Approx(h.u_l).margin(1e-12));
        REQUIRE(hp.s_w == h.s_w);
    }
}

TEST_CASE("backward matches finite differences on 50 instances") {
    Rng rng(606);
    for (int inst = 0; inst < 50; ++inst) {
        const int dim = 4 + static_cast<int>(rng.below(5));
        ModelParams params = init_params(dim, mix_seed(42, inst));
        for (auto& c : params.w_conf) c = 0.4 * rng.normal();
        const ObjectiveVector obj = gen_objective(dim, mix_seed(43, inst));
        const int n = 1 + static_cast<int>(rng.below(10));
        const DemonstrationSet ctx = build_context(obj, n, 2.0, mix_seed(44, inst));
        const PreferenceTriple pair = sample_triple(obj, 2.0, mix_seed(45, inst));
        const LossConfig cfg{0.02 + rng.uniform01(), {1, 1}, n};

        const BackwardResult bw = backward(params, ctx, pair, cfg);
        REQUIRE(std::isfinite(bw.loss));
        auto loss_at = [&]() { return icrm_loss(reparameterize(forward(params, ctx, pair)), cfg); };
        const double h = 1e-6;
        auto check_slot = [&](double* slot, double analytic) {
            const double keep = *slot;
            *slot = keep + h;
            const double up = loss_at();
            *slot = keep - h;
            const double dn = loss_at();
            *slot = keep;
            const double fd = (up - dn) / (2.0 * h);
            REQUIRE(std::fabs(analytic - fd) <= 1e-4 * std::fmax(std::fabs(fd), 1e-3));
        };
        for (int probe = 0; probe < 4; ++probe) {
            const std::size_t wi = rng.below(params.w_agg.size());
            check_slot(&params.w_agg[wi], bw.grad.w_agg[wi]);
        }
        const std::size_t bi = rng.below(params.b_agg.size());
        check_slot(&params.b_agg[bi], bw.grad.b_agg[bi]);
        for (std::size_t ci = 0; ci < 3; ++ci) {
            check_slot(&params.w_conf[ci], bw.grad.w_conf[ci]);
        }
    }
}

TEST_CASE("backward: sign of the reconstruction push and conf-grad factorization") {
    const int d = 4;
    ModelParams p = identity_model(d);
    DemonstrationSet ctx;
    ctx.triples.push_back(axis_triple(d, 0));
    ctx.agreement = 1.0;
    // symmetric candidates: mu = 0.5 via u_w = u_l = 0
    PreferenceTriple pair;
    pair.phi_prompt.assign(d, 0.0);
    pair.phi_chosen.assign(d, 0.0);
    pair.phi_rejected.assign(d, 0.0);
    pair.phi_chosen[1] = 1.0;
    pair.phi_rejected[1] = -1.0;  // delta along axis 1, orthogonal to context g = e_0...
    pair.phi_chosen[0] = 0.5;
    pair.phi_rejected[0] = -0.5;

    // lambda_eff = 0: loss decreases as mu rises, so d(u_w) must be negative
    const BackwardResult bw = backward(p, ctx, pair, {0.0, {1, 1}, 1});
    double du_w_dir = 0.0;
    for (int i = 0; i < d; ++i) {
        du_w_dir += bw.grad.b_agg[i] * (pair.phi_chosen[i] - pair.phi_rejected[i]);
    }
    CHECK(du_w_dir < 0.0);

    // w_conf gradient vanishes exactly when dL/dtau = 0 at the point
    const VariationalOutput v = reparameterize(forward(p, ctx, pair));
    const GradPair g = grad_mu_tau(v, {0.0, {1, 1}, 1});
    if (g.d_tau == 0.0) {
        CHECK(bw.grad.w_conf[0] == 0.0);
    } else {
        // scaling d_tau to zero via the chain factor is impossible here; instead
        // verify the factorization grad = (d_s_w + d_s_l) * features
        const auto f = confidence_features(ctx);
        const HeadScores h = forward(p, ctx, pair);
        const HeadGrads hg = grad_heads(h, {0.0, {1, 1}, 1});
        for (int i = 0; i < 3; ++i) {
            REQUIRE(bw.grad.w_conf[i] ==
                    Catch::Approx((hg.d_s_w + hg.d_s_l) * f[i]).margin(1e-15));
        }
    }
}

TEST_CASE("train with zero learning rate leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.dim = 6;
    cfg.steps = 5;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.0;
    cfg.seed = 9;
    const TrainResult res = train(cfg);
    const ModelParams fresh = init_params(cfg.dim, mix_seed(cfg.seed, 0x111));
    REQUIRE(res.params.w_agg == fresh.w_agg);
    REQUIRE(res.params.b_agg == fresh.b_agg);
    REQUIRE(res.params.w_conf == fresh.w_conf);
    REQUIRE(res.trace.size() == 5);
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        REQUIRE(res.trace[i].step == static_cast<int>(i) + 1);
    }
}

TEST_CASE("training is deterministic given the seed") {
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.steps = 40;
    cfg.batch_size = 8;
    cfg.seed = 31;
    const TrainResult a = train(cfg);
    const TrainResult b = train(cfg);
    REQUIRE(a.params.w_agg == b.params.w_agg);
    REQUIRE(a.params.w_conf == b.params.w_conf);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        REQUIRE(a.trace[i].loss == b.trace[i].loss);
    }
}

TEST_CASE("divergence guard reports the offending step") {
    TrainConfig cfg;
    cfg.dim = 6;
    cfg.steps = 200;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e6;  // guaranteed blow-up
    cfg.seed = 3;
    const TrainResult res = train(cfg);
    REQUIRE(res.status == TrainStatus::diverged);
    REQUIRE(res.abort_step >= 1);
    REQUIRE(res.trace.size() == static_cast<std::size_t>(res.abort_step));
}

TEST_CASE("bt selector keeps the tau channel at the constant 2 softplus(0) + 1") {
    TrainConfig cfg;
    cfg.dim = 6;
    cfg.objective = TrainObjective::bt;
    cfg.fresh_objective_per_instance = false;
    cfg.steps = 30;
    cfg.batch_size = 8;
    cfg.seed = 12;
    const TrainResult res = train(cfg);
    const double constant = 2.0 * softplus(0.0) + 1.0;
    for (const auto& r : res.trace) {
        REQUIRE(r.tau_mean == Catch::Approx(constant).margin(1e-12));
    }
    // context-free: aggregator stays zero
    for (double w : res.params.w_agg) REQUIRE(w == 0.0);
    for (double w : res.params.w_conf) REQUIRE(w == 0.0);
}

TEST_CASE("score_single multiplicative form") {
    const int d = 4;
    ModelParams p = identity_model(d);
    DemonstrationSet ctx;
    ctx.triples.push_back(axis_triple(d, 0));
    ctx.agreement = 1.0;

    std::vector<double> prompt(d, 0.0);
    std::vector<double> cand_zero(d, 0.0);  // orthogonal to g: u = 0
    cand_zero[1] = 3.0;
    CHECK(score_single(p, ctx, prompt, cand_zero) == Catch::Approx(0.0).margin(1e-15));

    // s -> -inf drives R -> 0 for finite u
    ModelParams tiny = p;
    tiny.w_conf = {0.0, 0.0, -40.0};
    std::vector<double> cand(d, 0.0);
    cand[0] = 2.5;
    CHECK(std::fabs(score_single(tiny, ctx, prompt, cand)) <= 1e-15);

    // same confidence, monotone in u
    std::vector<double> better(d, 0.0), worse(d, 0.0);
    better[0] = 2.0;
    worse[0] = 1.0;
    CHECK(score_single(p, ctx, prompt, better) > score_single(p, ctx, prompt, worse));
}

TEST_CASE("checkpoint round trip is byte-identical") {
    namespace fs = std::filesystem;
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.steps = 25;
    cfg.batch_size = 8;
    cfg.seed = 77;
    const TrainResult res = train(cfg);

    const fs::path p1 = fs::temp_directory_path() / "icrm_ckpt_a.json";
    const fs::path p2 = fs::temp_directory_path() / "icrm_ckpt_b.json";
    save_checkpoint(res.params, p1.string());
    const ModelParams loaded = load_checkpoint(p1.string());
    REQUIRE(loaded.dim == res.params.dim);
    REQUIRE(loaded.w_agg == res.params.w_agg);
    REQUIRE(loaded.b_agg == res.params.b_agg);
    REQUIRE(loaded.w_conf == res.params.w_conf);
    save_checkpoint(loaded, p2.string());
    REQUIRE(detail::read_file(p1.string()) == detail::read_file(p2.string()));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("checkpoint loader rejects unknown schema and bad dimensions") {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / "icrm_ckpt_bad.json";
    detail::write_file(p.string(),
                       R"({"schema_version": 99, "dim": 4, "w_agg": [], "b_agg": [], "w_conf": []})");
    CHECK_THROWS_AS(load_checkpoint(p.string()), std::runtime_error);
    detail::write_file(
        p.string(),
        R"({"schema_version": 1, "dim": 4, "w_agg": [1,2], "b_agg": [0,0,0,0], "w_conf": [0,0,0]})");
    CHECK_THROWS_AS(load_checkpoint(p.string()), std::runtime_error);
    fs::remove(p);
}

TEST_CASE("steerability after training: reversed context tracks reversed labels") {
    TrainConfig cfg;
    cfg.seed = 2025;
    cfg.steps = 1200;
    const TrainResult res = train(cfg);
    REQUIRE(res.status == TrainStatus::ok);

    const ObjectiveVector w = gen_objective(cfg.dim, 909);
    const ObjectiveVector rw = reversed(w);
    auto eval_under = [&](const ObjectiveVector& world) {
        double acc = 0.0;
        const int seeds = 2;
        for (int s = 0; s < seeds; ++s) {
            const DemonstrationSet ctx = build_context(world, 16, 2.0, mix_seed(31337, s));
            std::vector<PreferenceTriple> eval_set;
            for (int i = 0; i < 800; ++i) {
                eval_set.push_back(sample_triple(world, 2.0, mix_seed(404, s, i)));
            }
            acc += accuracy(res.params, ctx, eval_set);
        }
        return acc / seeds;
    };
    const double std_acc = eval_under(w);
    const double rev_acc = eval_under(rw);
    CAPTURE(std_acc, rev_acc);
    REQUIRE(std_acc > 0.6);  // trained model is well above chance at N=16
    REQUIRE(std::fabs(std_acc - rev_acc) <= 0.08);
}
