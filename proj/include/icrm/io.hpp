#pragma once

// Persistence: JSONL preference datasets, model checkpoints, trace CSVs.
// Checkpoint arrays are written with 17 significant digits so save/load/save
// round-trips are byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icrm/model.hpp"
#include "icrm/synth.hpp"

namespace icrm {

inline constexpr int kSchemaVersion = 1;

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    out += "]";
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void check_schema(const nlohmann::json& j, const std::string& path) {
    const int v = j.value("schema_version", -1);
    if (v != kSchemaVersion) {
        throw std::runtime_error(path + ": unknown schema_version " + std::to_string(v) +
                                 " (expected " + std::to_string(kSchemaVersion) + ")");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset: one JSON object per line with fixed field names.

inline void export_jsonl(const std::vector<PreferenceTriple>& triples, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& t : triples) {
        nlohmann::json j;
        j["phi_prompt"] = t.phi_prompt;
        j["phi_chosen"] = t.phi_chosen;
        j["phi_rejected"] = t.phi_rejected;
        j["outcome"] = t.outcome;
        os << j.dump() << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::vector<PreferenceTriple> import_jsonl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<PreferenceTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        PreferenceTriple t;
        t.phi_prompt = j.at("phi_prompt").get<std::vector<double>>();
        t.phi_chosen = j.at("phi_chosen").get<std::vector<double>>();
        t.phi_rejected = j.at("phi_rejected").get<std::vector<double>>();
        t.outcome = j.at("outcome").get<int>();
        if (t.outcome != 0 && t.outcome != 1) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": outcome not in {0,1}");
        }
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: dimension header plus flat parameter arrays.

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::string s = "{\n";
    s += "  \"schema_version\": " + std::to_string(kSchemaVersion) + ",\n";
    s += "  \"dim\": " + std::to_string(params.dim) + ",\n";
    s += "  \"w_agg\": " + detail::join_doubles(params.w_agg) + ",\n";
    s += "  \"b_agg\": " + detail::join_doubles(params.b_agg) + ",\n";
    s += "  \"w_conf\": " +
         detail::join_doubles({params.w_conf[0], params.w_conf[1], params.w_conf[2]}) + "\n";
    s += "}\n";
    detail::write_file(path, s);
}

inline ModelParams load_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    detail::check_schema(j, path);
    ModelParams p;
    p.dim = j.at("dim").get<int>();
    p.w_agg = j.at("w_agg").get<std::vector<double>>();
    p.b_agg = j.at("b_agg").get<std::vector<double>>();
    const auto conf = j.at("w_conf").get<std::vector<double>>();
    if (p.dim < 2 || p.w_agg.size() != static_cast<std::size_t>(p.dim) * p.dim ||
        p.b_agg.size() != static_cast<std::size_t>(p.dim) || conf.size() != 3) {
        throw std::runtime_error(path + ": inconsistent checkpoint dimensions");
    }
    p.w_conf = {conf[0], conf[1], conf[2]};
    return p;
}

// ---------------------------------------------------------------------------
// Trace CSV, header "step,loss,mu_mean,tau_mean".

inline void save_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::string s = "step,loss,mu_mean,tau_mean\n";
    for (const auto& r : trace) {
        s += std::to_string(r.step) + "," + format_double(r.loss) + "," + format_double(r.mu_mean) +
             "," + format_double(r.tau_mean) + "\n";
    }
    detail::write_file(path, s);
}

}  // namespace icrm
