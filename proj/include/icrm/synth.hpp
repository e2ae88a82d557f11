#pragma once

// Synthetic preference worlds: latent objective directions, Bradley-Terry
// sampled preference triples, and demonstration sets mixing two objectives.
// Every generator is a pure function of (parameters, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "icrm/rng.hpp"
#include "icrm/specfun.hpp"

namespace icrm {

struct ObjectiveVector {
    std::vector<double> weights;
    std::string name;
};

struct PreferenceTriple {
    std::vector<double> phi_prompt;
    std::vector<double> phi_chosen;
    std::vector<double> phi_rejected;
    int outcome = 1;  // o in {0,1}; 1 means the stored chosen/rejected order is the observed one
};

struct DemonstrationSet {
    std::vector<PreferenceTriple> triples;
    double mix_ratio = 1.0;   // fraction drawn from objective A
    double agreement = 1.0;   // fraction of triples whose true margin sign matches the majority
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

namespace detail {

inline constexpr std::uint64_t kStreamObjective = 0xA11CE;
inline constexpr std::uint64_t kStreamTriple = 0xB0B;

inline std::vector<double> normal_vector(Rng& rng, int dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace detail

// Unit-normalized latent preference direction, deterministic in seed.
inline ObjectiveVector gen_objective(int dim, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("gen_objective: dim must be >= 2");
    Rng rng(mix_seed(seed, detail::kStreamObjective, static_cast<std::uint64_t>(dim)));
    ObjectiveVector obj;
    obj.weights = detail::normal_vector(rng, dim);
    double norm = std::sqrt(dot(obj.weights, obj.weights));
    if (norm == 0.0) {  // measure-zero; retry deterministically
        obj.weights = detail::normal_vector(rng, dim);
        norm = std::sqrt(dot(obj.weights, obj.weights));
    }
    for (auto& w : obj.weights) w /= norm;
    obj.name = "obj-" + std::to_string(seed);
    return obj;
}

inline ObjectiveVector reversed(const ObjectiveVector& obj) {
    ObjectiveVector out;
    out.weights.reserve(obj.weights.size());
    for (double w : obj.weights) out.weights.push_back(-w);
    constexpr const char* suffix = "~rev";
    if (obj.name.size() >= 4 && obj.name.ends_with(suffix)) {
        out.name = obj.name.substr(0, obj.name.size() - 4);
    } else {
        out.name = obj.name + suffix;
    }
    return out;
}

// One BT-sampled comparison. The label draw is favorite-plus-upset: the
// deterministic favorite is the candidate with positive true margin, and an
// upset flips it with probability sigmoid(-|margin|). That is exactly the
// Bradley-Terry likelihood, and because the upset event depends only on
// |margin| the same seed under the reversed objective yields the identical
// triple with chosen/rejected swapped.
inline PreferenceTriple sample_triple(const ObjectiveVector& obj, double margin_scale,
                                      std::uint64_t seed) {
    if (!(margin_scale >= 0.0)) throw std::invalid_argument("sample_triple: margin_scale < 0");
    Rng rng(mix_seed(seed, detail::kStreamTriple));
    const int dim = static_cast<int>(obj.weights.size());
    PreferenceTriple t;
    t.phi_prompt = detail::normal_vector(rng, dim);
    std::vector<double> a = detail::normal_vector(rng, dim);
    std::vector<double> b = detail::normal_vector(rng, dim);
    double margin = 0.0;
    for (int i = 0; i < dim; ++i) margin += obj.weights[i] * (a[i] - b[i]);
    margin *= margin_scale;
    const bool a_favored = margin > 0.0;
    const bool upset = rng.uniform01() < sigmoid(-std::fabs(margin));
    const bool a_wins = a_favored != upset;
    t.phi_chosen = a_wins ? std::move(a) : std::move(b);
    t.phi_rejected = a_wins ? std::move(b) : std::move(a);
    t.outcome = 1;
    return t;
}

// True-margin sign of a labeled triple under the objective that generated it.
inline bool label_matches_objective(const PreferenceTriple& t, const ObjectiveVector& obj) {
    double m = 0.0;
    for (std::size_t i = 0; i < obj.weights.size(); ++i) {
        m += obj.weights[i] * (t.phi_chosen[i] - t.phi_rejected[i]);
    }
    return m > 0.0;
}

// Context of n demonstrations: round(mix_ratio * n) from obj_a, the rest from
// obj_b, deterministically shuffled. agreement = max(k, n-k)/n where k counts
// triples whose label matches their own generating objective.
inline DemonstrationSet build_context(const ObjectiveVector& obj_a, const ObjectiveVector& obj_b,
                                      int n, double mix_ratio, double margin_scale,
                                      std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("build_context: n must be >= 1");
    if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) {
        throw std::invalid_argument("build_context: mix_ratio must be in [0,1]");
    }
    const int from_a = static_cast<int>(std::lround(mix_ratio * n));
    DemonstrationSet ctx;
    ctx.mix_ratio = mix_ratio;
    ctx.triples.reserve(n);
    int matches = 0;
    for (int i = 0; i < n; ++i) {
        const ObjectiveVector& gen = (i < from_a) ? obj_a : obj_b;
        PreferenceTriple t = sample_triple(gen, margin_scale, mix_seed(seed, 0xC0, i));
        if (label_matches_objective(t, gen)) ++matches;
        ctx.triples.push_back(std::move(t));
    }
    Rng shuffle_rng(mix_seed(seed, 0x5F, n));
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(ctx.triples[i], ctx.triples[j]);
    }
    const int k = std::max(matches, n - matches);
    ctx.agreement = static_cast<double>(k) / n;
    return ctx;
}

inline DemonstrationSet build_context(const ObjectiveVector& obj, int n, double margin_scale,
                                      std::uint64_t seed) {
    return build_context(obj, obj, n, 1.0, margin_scale, seed);
}

}  // namespace icrm
