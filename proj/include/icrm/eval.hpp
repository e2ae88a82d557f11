#pragma once

// Measurement procedures: pairwise accuracy, tau-vs-N calibration, Pareto
// sweeps with exact 2-objective hypervolume, correlation statistics (Pearson,
// OLS and isotonic R^2), and the toy bandit reward-alignment harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "icrm/model.hpp"

namespace icrm {

// Fraction of triples with mu > 0.5 under the given context; exact ties count
// as incorrect.
inline double accuracy(const ModelParams& params, const DemonstrationSet& ctx,
                       const std::vector<PreferenceTriple>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("accuracy: empty eval set");
    int correct = 0;
    for (const auto& t : eval_set) {
        const HeadScores h = forward(params, ctx, t);
        if (sigmoid(h.u_w - h.u_l) > 0.5) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval_set.size());
}

struct CalibrationPoint {
    int n_demos = 0;
    double tau_mean = 0.0;
    double tau_std = 0.0;
};

inline std::vector<CalibrationPoint> calibration_curve(const ModelParams& params,
                                                       const ObjectiveVector& obj,
                                                       const std::vector<int>& n_values,
                                                       const std::vector<std::uint64_t>& seeds,
                                                       double margin_scale) {
    if (n_values.empty()) throw std::invalid_argument("calibration_curve: n_values empty");
    if (seeds.empty()) throw std::invalid_argument("calibration_curve: seeds empty");
    std::vector<CalibrationPoint> curve;
    curve.reserve(n_values.size());
    for (int n : n_values) {
        double sum = 0.0, sum2 = 0.0;
        for (std::uint64_t s : seeds) {
            const DemonstrationSet ctx =
                build_context(obj, n, margin_scale, mix_seed(s, 0xCA1, n));
            const double tau = 2.0 * softplus(confidence_logit(params, ctx)) + 1.0;
            sum += tau;
            sum2 += tau * tau;
        }
        const double m = sum / seeds.size();
        const double var = std::max(0.0, sum2 / seeds.size() - m * m);
        curve.push_back({n, m, std::sqrt(var)});
    }
    return curve;
}

// --------------------------------------------------------------------------
// Pareto sweep and hypervolume

struct ParetoPoint {
    double respond_acc = 0.0;
    double refuse_acc = 0.0;
    double mix_ratio = 0.0;
    int n_demos = 0;
};

inline const std::vector<double>& default_mix_ratios() {
    static const std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
    return ratios;
}

// One averaged point per ratio: respond_acc on obj_a-labeled held-out data,
// refuse_acc on obj_b-labeled data, both scored under the mixed context.
inline std::vector<ParetoPoint> pareto_sweep(const ModelParams& params,
                                             const ObjectiveVector& obj_a,
                                             const ObjectiveVector& obj_b, int n,
                                             const std::vector<double>& mix_ratios,
                                             const std::vector<std::uint64_t>& seeds,
                                             double margin_scale, int eval_size = 400) {
    if (mix_ratios.empty()) throw std::invalid_argument("pareto_sweep: mix_ratios empty");
    if (seeds.empty()) throw std::invalid_argument("pareto_sweep: seeds empty");
    std::vector<ParetoPoint> points;
    points.reserve(mix_ratios.size());
    for (double r : mix_ratios) {
        double respond = 0.0, refuse = 0.0;
        for (std::uint64_t s : seeds) {
            const DemonstrationSet ctx =
                build_context(obj_a, obj_b, n, r, margin_scale, mix_seed(s, 0xAD, n));
            std::vector<PreferenceTriple> set_a, set_b;
            set_a.reserve(eval_size);
            set_b.reserve(eval_size);
            for (int i = 0; i < eval_size; ++i) {
                set_a.push_back(sample_triple(obj_a, margin_scale, mix_seed(s, 0xEA, i)));
                set_b.push_back(sample_triple(obj_b, margin_scale, mix_seed(s, 0xEB, i)));
            }
            respond += accuracy(params, ctx, set_a);
            refuse += accuracy(params, ctx, set_b);
        }
        points.push_back({respond / seeds.size(), refuse / seeds.size(), r, n});
    }
    return points;
}

// Area dominated by the non-dominated subset relative to ref; exact
// sort-and-sum sweep for two objectives.
inline double hypervolume(const std::vector<ParetoPoint>& points,
                          std::pair<double, double> ref = {0.0, 0.0}) {
    if (points.empty()) return 0.0;
    for (const auto& p : points) {
        if (p.respond_acc < ref.first || p.refuse_acc < ref.second) {
            throw std::domain_error("hypervolume: point below reference");
        }
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(points.size());
    for (const auto& p : points) pts.emplace_back(p.respond_acc, p.refuse_acc);
    // keep only non-dominated points
    std::vector<std::pair<double, double>> front;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            if (q.first >= p.first && q.second >= p.second &&
                (q.first > p.first || q.second > p.second)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) front.push_back(p);
    }
    std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });
    double hv = 0.0;
    double prev_y = ref.second;
    for (const auto& [x, y] : front) {
        if (y <= prev_y) continue;  // duplicate
        hv += (x - ref.first) * (y - prev_y);
        prev_y = y;
    }
    return hv;
}

// --------------------------------------------------------------------------
// Correlation statistics

struct CorrelationReport {
    double pearson_r = 0.0;
    double r2_ols = 0.0;
    double r2_iso = 0.0;
};

namespace detail {

struct XYStats {
    double mean_x, mean_y, var_x, var_y, cov;
};

inline XYStats xy_stats(const std::vector<double>& xs, const std::vector<double>& ys,
                        const char* where) {
    if (xs.size() != ys.size()) throw std::invalid_argument(std::string(where) + ": size mismatch");
    if (xs.size() < 3) throw std::invalid_argument(std::string(where) + ": need >= 3 points");
    const double n = static_cast<double>(xs.size());
    XYStats s{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s.mean_x += xs[i];
        s.mean_y += ys[i];
    }
    s.mean_x /= n;
    s.mean_y /= n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - s.mean_x;
        const double dy = ys[i] - s.mean_y;
        s.var_x += dx * dx;
        s.var_y += dy * dy;
        s.cov += dx * dy;
    }
    if (s.var_x == 0.0) throw std::domain_error(std::string(where) + ": xs have zero variance");
    return s;
}

}  // namespace detail

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto s = detail::xy_stats(xs, ys, "pearson");
    if (s.var_y == 0.0) throw std::domain_error("pearson: ys have zero variance");
    return s.cov / std::sqrt(s.var_x * s.var_y);
}

inline double r2_ols(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto s = detail::xy_stats(xs, ys, "r2_ols");
    if (s.var_y == 0.0) throw std::domain_error("r2_ols: SST is zero");
    const double slope = s.cov / s.var_x;
    const double intercept = s.mean_y - slope * s.mean_x;
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double resid = ys[i] - (intercept + slope * xs[i]);
        ssr += resid * resid;
    }
    return 1.0 - ssr / s.var_y;
}

// Least-squares nondecreasing fit via pool-adjacent-violators.
inline std::vector<double> pava_nondecreasing(const std::vector<double>& values,
                                              const std::vector<double>& weights) {
    const std::size_t n = values.size();
    std::vector<double> level(n), weight(n);
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = values[i];
        weight[blocks] = weights[i];
        count[blocks] = 1;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
            const double w = weight[blocks - 2] + weight[blocks - 1];
            level[blocks - 2] =
                (weight[blocks - 2] * level[blocks - 2] + weight[blocks - 1] * level[blocks - 1]) / w;
            weight[blocks - 2] = w;
            count[blocks - 2] += count[blocks - 1];
            --blocks;
        }
    }
    std::vector<double> fit;
    fit.reserve(n);
    for (std::size_t b = 0; b < blocks; ++b) {
        fit.insert(fit.end(), count[b], level[b]);
    }
    return fit;
}

// 1 - SSR/SST with SSR from the nondecreasing isotonic fit ordered by xs;
// ties in xs are group-averaged before fitting.
inline double r2_iso(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto s = detail::xy_stats(xs, ys, "r2_iso");
    if (s.var_y == 0.0) throw std::domain_error("r2_iso: SST is zero");
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    // group ties in x
    std::vector<double> gx, gy, gw;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t j = k;
        double sum = 0.0;
        std::vector<std::size_t> group;
        while (j < order.size() && xs[order[j]] == xs[order[k]]) {
            sum += ys[order[j]];
            group.push_back(order[j]);
            ++j;
        }
        gx.push_back(xs[order[k]]);
        gy.push_back(sum / (j - k));
        gw.push_back(static_cast<double>(j - k));
        members.push_back(std::move(group));
        k = j;
    }
    const std::vector<double> fit = pava_nondecreasing(gy, gw);
    double ssr = 0.0;
    for (std::size_t g = 0; g < members.size(); ++g) {
        for (std::size_t idx : members[g]) {
            const double resid = ys[idx] - fit[g];
            ssr += resid * resid;
        }
    }
    return 1.0 - ssr / s.var_y;
}

// --------------------------------------------------------------------------
// Bandit reward-alignment harness (RLVR analog). A softmax policy over
// discrete candidate generators is trained by REINFORCE on the reward model's
// scores; the report regresses per-batch mean reward on per-batch gold
// accuracy (the per-training-step reading of the correlation analysis).

struct BanditTask {
    std::vector<double> features;
    bool gold = false;
};

using BanditArm = std::vector<BanditTask>;

// Four generators with gold accuracies {0.2, 0.4, 0.6, 0.8} by construction:
// each arm holds exactly round(rate * per_arm) gold tasks, and gold tasks are
// shifted along +obj, non-gold along -obj.
inline std::vector<BanditArm> make_bandit_arms(const ObjectiveVector& obj, int per_arm,
                                               double shift, std::uint64_t seed,
                                               const std::vector<double>& gold_rates = {0.2, 0.4,
                                                                                        0.6, 0.8}) {
    if (per_arm < 1) throw std::invalid_argument("make_bandit_arms: per_arm must be >= 1");
    const int dim = static_cast<int>(obj.weights.size());
    std::vector<BanditArm> arms;
    arms.reserve(gold_rates.size());
    for (std::size_t a = 0; a < gold_rates.size(); ++a) {
        BanditArm arm;
        arm.reserve(per_arm);
        const int golds = static_cast<int>(std::lround(gold_rates[a] * per_arm));
        for (int i = 0; i < per_arm; ++i) {
            Rng rng(mix_seed(seed, 0xBA0 + a, i));
            BanditTask task;
            task.gold = i < golds;
            task.features.resize(dim);
            const double dir = task.gold ? shift : -shift;
            for (int j = 0; j < dim; ++j) task.features[j] = rng.normal() + dir * obj.weights[j];
            arm.push_back(std::move(task));
        }
        Rng shuffle(mix_seed(seed, 0xBAF, a));
        for (int i = per_arm - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(arm[i], arm[j]);
        }
        arms.push_back(std::move(arm));
    }
    return arms;
}

struct BanditResult {
    CorrelationReport report;
    bool report_degenerate = false;  // batch statistics had no variance
    double best_arm_prob = 0.0;
    std::vector<double> final_policy;
    std::vector<std::pair<double, double>> batch_stats;  // (mean reward, gold accuracy)
};

inline BanditResult bandit_alignment(const std::function<double(const BanditTask&)>& reward,
                                     const std::vector<BanditArm>& arms, int steps, int batch,
                                     double lr, std::uint64_t seed) {
    if (arms.size() < 2) throw std::invalid_argument("bandit_alignment: need >= 2 arms");
    if (steps < 1 || batch < 1) throw std::invalid_argument("bandit_alignment: bad steps/batch");
    std::vector<double> gold_rate(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) {
        if (arms[a].empty()) throw std::invalid_argument("bandit_alignment: empty arm");
        int g = 0;
        for (const auto& t : arms[a]) g += t.gold ? 1 : 0;
        gold_rate[a] = static_cast<double>(g) / arms[a].size();
    }
    if (*std::max_element(gold_rate.begin(), gold_rate.end()) ==
        *std::min_element(gold_rate.begin(), gold_rate.end())) {
        throw std::invalid_argument("bandit_alignment: arms must have distinct gold accuracy");
    }

    const std::size_t k = arms.size();
    std::vector<double> logits(k, 0.0), policy(k, 1.0 / k), grad(k);
    Rng rng(mix_seed(seed, 0xB1D));
    BanditResult res;
    res.batch_stats.reserve(steps);

    for (int step = 0; step < steps; ++step) {
        // softmax
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (std::size_t a = 0; a < k; ++a) z += std::exp(logits[a] - mx);
        for (std::size_t a = 0; a < k; ++a) policy[a] = std::exp(logits[a] - mx) / z;

        std::vector<std::size_t> chosen(batch);
        std::vector<double> rewards(batch);
        double gold_acc = 0.0;
        for (int b = 0; b < batch; ++b) {
            double u = rng.uniform01();
            std::size_t a = 0;
            for (; a + 1 < k; ++a) {
                if (u < policy[a]) break;
                u -= policy[a];
            }
            const BanditTask& task = arms[a][rng.below(arms[a].size())];
            chosen[b] = a;
            rewards[b] = reward(task);
            gold_acc += task.gold ? 1.0 : 0.0;
        }
        const double mean_r = std::accumulate(rewards.begin(), rewards.end(), 0.0) / batch;
        gold_acc /= batch;
        res.batch_stats.emplace_back(mean_r, gold_acc);

        // REINFORCE with the batch mean as baseline
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int b = 0; b < batch; ++b) {
            const double adv = rewards[b] - mean_r;
            for (std::size_t a = 0; a < k; ++a) {
                grad[a] += adv * ((chosen[b] == a ? 1.0 : 0.0) - policy[a]);
            }
        }
        for (std::size_t a = 0; a < k; ++a) logits[a] += lr * grad[a] / batch;
    }

    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t a = 0; a < k; ++a) z += std::exp(logits[a] - mx);
    for (std::size_t a = 0; a < k; ++a) policy[a] = std::exp(logits[a] - mx) / z;
    res.final_policy = policy;
    const std::size_t best_arm = static_cast<std::size_t>(
        std::max_element(gold_rate.begin(), gold_rate.end()) - gold_rate.begin());
    res.best_arm_prob = policy[best_arm];

    std::vector<double> xs, ys;
    xs.reserve(res.batch_stats.size());
    ys.reserve(res.batch_stats.size());
    for (const auto& [r, g] : res.batch_stats) {
        xs.push_back(r);
        ys.push_back(g);
    }
    try {
        res.report.pearson_r = pearson(xs, ys);
        res.report.r2_ols = r2_ols(xs, ys);
        res.report.r2_iso = r2_iso(xs, ys);
    } catch (const std::domain_error&) {
        res.report_degenerate = true;
        res.report = CorrelationReport{};
    }
    return res;
}

inline BanditResult bandit_alignment(const ModelParams& params, const DemonstrationSet& ctx,
                                     const std::vector<BanditArm>& arms, int steps, int batch,
                                     double lr, std::uint64_t seed) {
    std::vector<double> prompt(params.dim, 0.0);
    return bandit_alignment(
        [&](const BanditTask& t) { return score_single(params, ctx, prompt, t.features); }, arms,
        steps, batch, lr, seed);
}

}  // namespace icrm
