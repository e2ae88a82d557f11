// Command-line front end: verify / train / eval / report.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure,
// 4 invariant failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icrm/icrm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInvariant = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

// ---------------------------------------------------------------------------
// Train configuration: a single JSON document; defaults are materialized into
// the persisted copy so a run replays from its own config alone.

struct ResolvedTrainConfig {
    std::string run_id;
    std::string objective = "icrm";
    double lambda = 0.1;
    double prior_alpha = 1.0;
    double prior_beta = 1.0;
    int dim = 16;
    double margin_scale = 2.0;
    std::vector<int> n_choices = {1, 2, 4, 8, 16};
    std::string world = "fresh";  // "fresh" per-instance objectives, or "fixed"
    int steps = 2000;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
}

template <typename T>
T field_as(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field \"" + key + "\" has the wrong type");
    }
}

// Returns one resolved config per lambda in the (possibly single-valued) sweep.
std::vector<ResolvedTrainConfig> resolve_train_configs(const json& doc,
                                                       std::optional<double> lambda_flag,
                                                       std::optional<int> n_flag,
                                                       std::uint64_t seed) {
    static const std::vector<std::string> known = {
        "run_id",     "objective",  "lambda",        "prior_alpha", "prior_beta",
        "dim",        "margin_scale", "n_choices",   "world",       "steps",
        "batch_size", "learning_rate", "momentum",   "seed",        "schema_version"};
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("config: unknown field \"" + key + "\"");
        }
    }

    ResolvedTrainConfig base;
    base.objective = field_as<std::string>(doc, "objective", base.objective);
    if (base.objective != "icrm" && base.objective != "bt") {
        throw ConfigError("config: field \"objective\" must be \"icrm\" or \"bt\"");
    }
    base.prior_alpha = field_as<double>(doc, "prior_alpha", base.prior_alpha);
    base.prior_beta = field_as<double>(doc, "prior_beta", base.prior_beta);
    base.dim = field_as<int>(doc, "dim", base.dim);
    base.margin_scale = field_as<double>(doc, "margin_scale", base.margin_scale);
    base.n_choices = field_as<std::vector<int>>(doc, "n_choices", base.n_choices);
    base.world = field_as<std::string>(doc, "world", base.objective == "bt" ? "fixed" : "fresh");
    base.steps = field_as<int>(doc, "steps", base.steps);
    base.batch_size = field_as<int>(doc, "batch_size", base.batch_size);
    base.learning_rate = field_as<double>(doc, "learning_rate", base.learning_rate);
    base.momentum = field_as<double>(doc, "momentum", base.momentum);
    base.seed = seed;
    if (base.world != "fresh" && base.world != "fixed") {
        throw ConfigError("config: field \"world\" must be \"fresh\" or \"fixed\"");
    }
    if (n_flag) base.n_choices = {*n_flag};
    if (base.n_choices.empty()) throw ConfigError("config: field \"n_choices\" is empty");
    for (int n : base.n_choices) {
        if (n < 1) throw ConfigError("config: field \"n_choices\" entries must be >= 1");
    }
    if (base.dim < 2) throw ConfigError("config: field \"dim\" must be >= 2");
    if (base.steps < 1) throw ConfigError("config: field \"steps\" must be >= 1");
    if (base.batch_size < 1) throw ConfigError("config: field \"batch_size\" must be >= 1");
    if (!(base.learning_rate >= 0.0)) throw ConfigError("config: field \"learning_rate\" must be >= 0");
    if (!(base.prior_alpha > 0.0) || !(base.prior_beta > 0.0)) {
        throw ConfigError("config: fields \"prior_alpha\"/\"prior_beta\" must be positive");
    }

    std::vector<double> lambdas;
    if (lambda_flag) {
        lambdas = {*lambda_flag};
    } else if (doc.contains("lambda") && doc.at("lambda").is_array()) {
        lambdas = field_as<std::vector<double>>(doc, "lambda", {});
        if (lambdas.empty()) throw ConfigError("config: field \"lambda\" sweep is empty");
    } else {
        lambdas = {field_as<double>(doc, "lambda", 0.1)};
    }
    for (double l : lambdas) {
        if (l < 0.0) throw ConfigError("config: field \"lambda\" must be >= 0");
    }

    const std::string run_base = field_as<std::string>(doc, "run_id", "");
    std::vector<ResolvedTrainConfig> out;
    for (double l : lambdas) {
        ResolvedTrainConfig c = base;
        c.lambda = l;
        std::string tag = c.objective;
        if (c.objective == "icrm") {
            std::string ls = icrm::format_double(l);
            tag += "_lam" + ls;
        }
        tag += "_seed" + std::to_string(seed);
        c.run_id = run_base.empty() ? tag : (lambdas.size() > 1 ? run_base + "_" + tag : run_base);
        out.push_back(std::move(c));
    }
    return out;
}

ordered_json config_to_json(const ResolvedTrainConfig& c) {
    ordered_json j;
    j["schema_version"] = icrm::kSchemaVersion;
    j["run_id"] = c.run_id;
    j["objective"] = c.objective;
    j["lambda"] = c.lambda;
    j["prior_alpha"] = c.prior_alpha;
    j["prior_beta"] = c.prior_beta;
    j["dim"] = c.dim;
    j["margin_scale"] = c.margin_scale;
    j["n_choices"] = c.n_choices;
    j["world"] = c.world;
    j["steps"] = c.steps;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["momentum"] = c.momentum;
    j["seed"] = c.seed;
    return j;
}

icrm::TrainConfig to_train_config(const ResolvedTrainConfig& c) {
    icrm::TrainConfig t;
    t.dim = c.dim;
    t.margin_scale = c.margin_scale;
    t.n_choices = c.n_choices;
    t.fresh_objective_per_instance = c.world == "fresh";
    t.objective = c.objective == "bt" ? icrm::TrainObjective::bt : icrm::TrainObjective::icrm;
    t.lambda_base = c.lambda;
    t.prior = icrm::BetaParams{c.prior_alpha, c.prior_beta};
    t.steps = c.steps;
    t.batch_size = c.batch_size;
    t.learning_rate = c.learning_rate;
    t.momentum = c.momentum;
    t.seed = c.seed;
    return t;
}

// ---------------------------------------------------------------------------

int cmd_verify(std::uint64_t seed, const std::string& report_path) {
    const auto results = icrm::run_verification(seed);
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
        if (!r.detail.empty()) std::cout << " - " << r.detail;
        std::cout << "\n";
        all_pass = all_pass && r.pass;
    }
    if (!report_path.empty()) {
        ordered_json j;
        j["schema_version"] = icrm::kSchemaVersion;
        j["seed"] = seed;
        j["pass"] = all_pass;
        j["checks"] = ordered_json::array();
        for (const auto& r : results) {
            j["checks"].push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        }
        write_text(report_path, j.dump(2) + "\n");
    }
    return all_pass ? kExitOk : kExitInvariant;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
              std::optional<double> lambda_flag, std::optional<int> n_flag) {
    const json doc = config_path.empty() ? json::object() : load_json_file(config_path);
    const auto configs = resolve_train_configs(doc, lambda_flag, n_flag, seed);
    fs::create_directories(out_dir);

    bool any_numeric_failure = false;
    for (const auto& cfg : configs) {
        const fs::path run_dir = fs::path(out_dir) / cfg.run_id;
        if (fs::exists(run_dir)) {
            std::cerr << "error: run directory already exists: " << run_dir.string() << "\n";
            return kExitConfig;
        }
        fs::create_directories(run_dir);
        write_text(run_dir / "config.json", config_to_json(cfg).dump(2) + "\n");

        const icrm::TrainResult res = icrm::train(to_train_config(cfg));
        icrm::save_trace_csv(res.trace, (run_dir / "trace.csv").string());
        icrm::save_checkpoint(res.params, (run_dir / "checkpoint.json").string());

        ordered_json metrics;
        metrics["schema_version"] = icrm::kSchemaVersion;
        metrics["run_id"] = cfg.run_id;
        metrics["seed"] = cfg.seed;
        metrics["status"] =
            res.status == icrm::TrainStatus::ok ? "ok" : "aborted_nonfinite_loss";
        if (res.status != icrm::TrainStatus::ok) metrics["abort_step"] = res.abort_step;
        metrics["steps_run"] = static_cast<int>(res.trace.size());
        if (!res.trace.empty()) {
            const auto& last = res.trace.back();
            metrics["final_loss"] = last.loss;
            metrics["final_mu_mean"] = last.mu_mean;
            metrics["final_tau_mean"] = last.tau_mean;
        }
        write_text(run_dir / "metrics.json", metrics.dump(2) + "\n");

        if (res.status != icrm::TrainStatus::ok) {
            std::cerr << "error: training loss became non-finite at step " << res.abort_step
                      << " (run " << cfg.run_id << ")\n";
            any_numeric_failure = true;
        } else {
            std::cout << "run " << cfg.run_id << ": " << res.trace.size() << " steps, final loss "
                      << res.trace.back().loss << "\n";
        }
    }
    return any_numeric_failure ? kExitNumeric : kExitOk;
}

std::string csv_num(double x) { return icrm::format_double(x); }

int cmd_eval(const std::string& checkpoint_path, const std::string& protocol,
             const std::string& out_dir, std::uint64_t seed, std::optional<int> n_flag,
             std::optional<double> mix_ratio_flag, bool reversed_flag,
             const std::string& config_path) {
    const icrm::ModelParams params = icrm::load_checkpoint(checkpoint_path);

    double margin_scale = 2.0;
    if (!config_path.empty()) {
        const json doc = load_json_file(config_path);
        margin_scale = field_as<double>(doc, "margin_scale", margin_scale);
        const int cfg_dim = field_as<int>(doc, "dim", params.dim);
        if (cfg_dim != params.dim) {
            throw ConfigError("config: world dim " + std::to_string(cfg_dim) +
                              " does not match checkpoint dim " + std::to_string(params.dim));
        }
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    icrm::ObjectiveVector obj_a = icrm::gen_objective(params.dim, icrm::mix_seed(seed, 0xA0));
    const icrm::ObjectiveVector obj_b = icrm::gen_objective(params.dim, icrm::mix_seed(seed, 0xB0));
    constexpr int kEvalSeeds = 4;  // mean of four runs

    ordered_json metrics;
    metrics["schema_version"] = icrm::kSchemaVersion;
    metrics["protocol"] = protocol;
    metrics["seed"] = seed;

    if (protocol == "accuracy") {
        const int n = n_flag.value_or(16);
        const icrm::ObjectiveVector world = reversed_flag ? icrm::reversed(obj_a) : obj_a;
        std::string csv = "seed,n_demos,reversed,accuracy\n";
        double mean = 0.0;
        ordered_json per_seed = ordered_json::array();
        for (int s = 0; s < kEvalSeeds; ++s) {
            const std::uint64_t es = icrm::mix_seed(seed, 0xACC, s);
            const icrm::DemonstrationSet ctx = icrm::build_context(world, n, margin_scale, es);
            std::vector<icrm::PreferenceTriple> eval_set;
            eval_set.reserve(800);
            for (int i = 0; i < 800; ++i) {
                eval_set.push_back(icrm::sample_triple(world, margin_scale,
                                                       icrm::mix_seed(es, 0xE, i)));
            }
            const double acc = icrm::accuracy(params, ctx, eval_set);
            mean += acc;
            per_seed.push_back(acc);
            csv += std::to_string(s) + "," + std::to_string(n) + "," +
                   (reversed_flag ? "1" : "0") + "," + csv_num(acc) + "\n";
        }
        mean /= kEvalSeeds;
        metrics["n_demos"] = n;
        metrics["reversed"] = reversed_flag;
        metrics["accuracy_mean"] = mean;
        metrics["accuracy_per_seed"] = per_seed;
        write_text(out / "accuracy.csv", csv);
        std::cout << "accuracy(n=" << n << (reversed_flag ? ", reversed" : "") << ") = " << mean
                  << "\n";
    } else if (protocol == "calibration") {
        std::vector<int> n_values = {1, 2, 4, 8, 16, 32};
        if (n_flag) n_values = {*n_flag};
        std::vector<std::uint64_t> seeds;
        for (int s = 0; s < kEvalSeeds; ++s) seeds.push_back(icrm::mix_seed(seed, 0xCA1, s));
        const auto curve = icrm::calibration_curve(params, obj_a, n_values, seeds, margin_scale);
        std::string csv = "n_demos,tau_mean,tau_std\n";
        ordered_json rows = ordered_json::array();
        for (const auto& pt : curve) {
            csv += std::to_string(pt.n_demos) + "," + csv_num(pt.tau_mean) + "," +
                   csv_num(pt.tau_std) + "\n";
            rows.push_back({{"n_demos", pt.n_demos}, {"tau_mean", pt.tau_mean},
                            {"tau_std", pt.tau_std}});
        }
        metrics["curve"] = rows;
        write_text(out / "calibration.csv", csv);
        std::cout << "calibration curve over " << n_values.size() << " context sizes written\n";
    } else if (protocol == "pareto") {
        std::vector<int> n_values = {1, 2, 4, 8, 16};
        if (n_flag) n_values = {*n_flag};
        std::vector<double> ratios = icrm::default_mix_ratios();
        if (mix_ratio_flag) ratios = {*mix_ratio_flag};
        std::vector<std::uint64_t> seeds;
        for (int s = 0; s < kEvalSeeds; ++s) seeds.push_back(icrm::mix_seed(seed, 0xFA, s));
        std::string csv = "mix_ratio,n_demos,respond_acc,refuse_acc\n";
        ordered_json hv = ordered_json::object();
        for (int n : n_values) {
            const auto points =
                icrm::pareto_sweep(params, obj_a, obj_b, n, ratios, seeds, margin_scale);
            for (const auto& p : points) {
                csv += csv_num(p.mix_ratio) + "," + std::to_string(p.n_demos) + "," +
                       csv_num(p.respond_acc) + "," + csv_num(p.refuse_acc) + "\n";
            }
            hv[std::to_string(n)] = icrm::hypervolume(points);
        }
        metrics["hv"] = hv;
        write_text(out / "pareto.csv", csv);
        std::cout << "pareto sweep written; hv keys: " << hv.size() << "\n";
    } else if (protocol == "bandit") {
        const int n = n_flag.value_or(16);
        const icrm::DemonstrationSet ctx =
            icrm::build_context(obj_a, n, margin_scale, icrm::mix_seed(seed, 0xBC));
        const auto arms = icrm::make_bandit_arms(obj_a, 200, 1.0, icrm::mix_seed(seed, 0xBB));
        const auto res = icrm::bandit_alignment(params, ctx, arms, 400, 32, 0.5,
                                                icrm::mix_seed(seed, 0xBE));
        std::string csv = "batch,mean_reward,gold_accuracy\n";
        for (std::size_t b = 0; b < res.batch_stats.size(); ++b) {
            csv += std::to_string(b) + "," + csv_num(res.batch_stats[b].first) + "," +
                   csv_num(res.batch_stats[b].second) + "\n";
        }
        metrics["pearson_r"] = res.report.pearson_r;
        metrics["r2_ols"] = res.report.r2_ols;
        metrics["r2_iso"] = res.report.r2_iso;
        metrics["report_degenerate"] = res.report_degenerate;
        metrics["best_arm_prob"] = res.best_arm_prob;
        metrics["final_policy"] = res.final_policy;
        write_text(out / "bandit.csv", csv);
        std::cout << "bandit: pearson " << res.report.pearson_r << ", best-arm prob "
                  << res.best_arm_prob << "\n";
    } else {
        throw ConfigError("unknown protocol \"" + protocol +
                          "\" (expected accuracy|calibration|pareto|bandit)");
    }

    write_text(out / "metrics.json", metrics.dump(2) + "\n");
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& report_path) {
    std::string csv = "run_id,objective,lambda,seed,status,final_loss,final_mu_mean,final_tau_mean\n";
    for (const auto& dir : run_dirs) {
        const fs::path d(dir);
        const json cfg = load_json_file((d / "config.json").string());
        json metrics = load_json_file((d / "metrics.json").string());
        const int v = metrics.value("schema_version", -1);
        if (v != icrm::kSchemaVersion) {
            throw ConfigError(dir + "/metrics.json: unknown schema_version " + std::to_string(v));
        }
        csv += cfg.value("run_id", std::string("?")) + "," + cfg.value("objective", std::string("?")) +
               "," + csv_num(cfg.value("lambda", 0.0)) + "," +
               std::to_string(cfg.value("seed", std::uint64_t{0})) + "," +
               metrics.value("status", std::string("?")) + "," +
               csv_num(metrics.value("final_loss", 0.0)) + "," +
               csv_num(metrics.value("final_mu_mean", 0.0)) + "," +
               csv_num(metrics.value("final_tau_mean", 0.0)) + "\n";
    }
    write_text(report_path, csv);
    std::cout << "aggregated " << run_dirs.size() << " runs\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational in-context reward modeling toolkit"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "Run the numerical invariant suite");
    std::uint64_t verify_seed = 0;
    std::string verify_report;
    verify->add_option("--seed", verify_seed, "Seed for randomized sweeps")->required();
    verify->add_option("--report", verify_report, "Optional JSON report path");

    // train
    auto* train = app.add_subcommand("train", "Train a model and persist the run record");
    std::string train_config, train_out;
    std::uint64_t train_seed = 0;
    double train_lambda = 0.0;
    int train_n = 0;
    train->add_option("--config", train_config, "JSON config path")->check(CLI::ExistingFile);
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--seed", train_seed, "Training seed")->required();
    auto* lam_opt = train->add_option("--lambda", train_lambda, "Override KL weight lambda");
    auto* n_opt = train->add_option("--n", train_n, "Pin the context size to a single N");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under a protocol");
    std::string eval_ckpt, eval_protocol, eval_out, eval_config;
    std::uint64_t eval_seed = 0;
    double eval_mix = 0.0;
    int eval_n = 0;
    bool eval_reversed = false;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint.json path")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--protocol", eval_protocol, "accuracy|calibration|pareto|bandit")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_option("--seed", eval_seed, "Evaluation seed")->required();
    eval->add_option("--config", eval_config, "Optional world config (dim, margin_scale)")
        ->check(CLI::ExistingFile);
    auto* mix_opt = eval->add_option("--mix-ratio", eval_mix, "Single mix ratio for pareto");
    auto* evaln_opt = eval->add_option("--n", eval_n, "Context size (or single N for sweeps)");
    eval->add_flag("--reversed", eval_reversed, "Reversed-context / reversed-label evaluation");

    // report
    auto* report = app.add_subcommand("report", "Aggregate run records into one CSV");
    std::vector<std::string> report_dirs;
    std::string report_path;
    std::uint64_t report_seed = 0;
    report->add_option("runs", report_dirs, "Run directories")->required()->expected(-1);
    report->add_option("--report", report_path, "Output CSV path")->required();
    report->add_option("--seed", report_seed, "Seed (accepted for interface uniformity)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (verify->parsed()) {
            return cmd_verify(verify_seed, verify_report);
        }
        if (train->parsed()) {
            return cmd_train(train_config, train_out, train_seed,
                             lam_opt->count() ? std::optional<double>(train_lambda) : std::nullopt,
                             n_opt->count() ? std::optional<int>(train_n) : std::nullopt);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_ckpt, eval_protocol, eval_out, eval_seed,
                            evaln_opt->count() ? std::optional<int>(eval_n) : std::nullopt,
                            mix_opt->count() ? std::optional<double>(eval_mix) : std::nullopt,
                            eval_reversed, eval_config);
        }
        if (report->parsed()) {
            return cmd_report(report_dirs, report_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
