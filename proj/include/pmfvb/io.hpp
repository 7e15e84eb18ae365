#pragma once

// JSON and CSV serialization of models, fit metrics and evaluation reports.
// Model reals are written with 17 significant digits so a save/load round
// trip is exact.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pmfvb/data.hpp"
#include "pmfvb/error.hpp"
#include "pmfvb/eval.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/vb.hpp"

namespace pmfvb {

using Json = nlohmann::json;

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// {"N":..,"I":[..],"R":..,"lambda":[..],"factors":[[[..]]]} with factors
/// indexed [n][category - 1][r]. `manifest`, if an object, is appended under "manifest".
inline std::string model_to_json(const CpdModel& model, const Json& manifest = Json()) {
    const std::size_t R = model.rank();
    std::string s = "{\"N\":" + std::to_string(model.num_vars()) + ",\"I\":[";
    for (std::size_t n = 0; n < model.num_vars(); ++n) s += (n ? "," : "") + std::to_string(model.cardinality(n));
    s += "],\"R\":" + std::to_string(R) + ",\"lambda\":[";
    for (std::size_t r = 0; r < R; ++r) s += (r ? "," : "") + format_real(model.lambda()[r]);
    s += "],\"factors\":[";
    for (std::size_t n = 0; n < model.num_vars(); ++n) {
        s += n ? ",[" : "[";
        const auto A = model.factor(n);
        for (int i = 0; i < model.cardinality(n); ++i) {
            s += i ? ",[" : "[";
            for (std::size_t r = 0; r < R; ++r) {
                s += (r ? "," : "") + format_real(A[static_cast<std::size_t>(i) * R + r]);
            }
            s += "]";
        }
        s += "]";
    }
    s += "]";
    if (manifest.is_object()) s += ",\"manifest\":" + manifest.dump();
    s += "}\n";
    return s;
}

inline CpdModel model_from_json(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    try {
        const auto N = j.at("N").get<std::size_t>();
        const auto cards = j.at("I").get<std::vector<int>>();
        const auto R = j.at("R").get<std::size_t>();
        auto lambda = j.at("lambda").get<std::vector<double>>();
        const auto& fj = j.at("factors");
        if (cards.size() != N || lambda.size() != R || fj.size() != N) {
            throw ParseError("model JSON: N, I, R, lambda and factors disagree in size");
        }
        std::vector<std::vector<double>> factors(N);
        for (std::size_t n = 0; n < N; ++n) {
            const auto rows = fj[n].get<std::vector<std::vector<double>>>();
            if (rows.size() != static_cast<std::size_t>(cards[n])) {
                throw ParseError("model JSON: factor " + std::to_string(n + 1) + " has the wrong number of rows");
            }
            for (const auto& row : rows) {
                if (row.size() != R) {
                    throw ParseError("model JSON: factor " + std::to_string(n + 1) + " has a row of wrong length");
                }
                factors[n].insert(factors[n].end(), row.begin(), row.end());
            }
        }
        return CpdModel(cards, std::move(lambda), std::move(factors));
    } catch (const Json::exception& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    } catch (const DomainError& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ParseError("write failed for '" + path + "'");
}

inline CpdModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

inline void save_model(const std::string& path, const CpdModel& model, const Json& manifest = Json()) {
    write_text_file(path, model_to_json(model, manifest));
}

/// Metrics of a fit: ranks, iteration count, stop reason and traces.
inline Json fit_metrics_json(const FitResult& result) {
    Json j;
    j["detected_rank"] = result.detected_rank;
    j["initial_rank"] = result.initial_rank;
    j["iterations"] = result.iterations;
    j["stop_reason"] = to_string(result.stop);
    j["elbo_trace"] = result.elbo_trace;
    Json nll = Json::array();
    for (const auto& [k, v] : result.heldout_nll_trace) nll.push_back(Json::array({k, v}));
    j["heldout_nll_trace"] = nll;
    if (result.batch_size > 0) {
        j["batch_size"] = result.batch_size;
        Json lr = Json::array();
        for (const auto& [k, v] : result.learning_rate_trace) lr.push_back(Json::array({k, v}));
        j["learning_rate_trace"] = lr;
    }
    return j;
}

/// Two-column CSV "iteration,elbo".
inline std::string elbo_trace_csv(const FitResult& result) {
    std::string s = "iteration,elbo\n";
    for (std::size_t k = 0; k < result.elbo_trace.size(); ++k) {
        s += std::to_string(k + 1) + "," + format_real(result.elbo_trace[k]) + "\n";
    }
    return s;
}

/// Two-column CSV "iteration,nll".
inline std::string nll_trace_csv(const FitResult& result) {
    std::string s = "iteration,nll\n";
    for (const auto& [k, v] : result.heldout_nll_trace) s += std::to_string(k) + "," + format_real(v) + "\n";
    return s;
}

inline Json metric_report_json(const MetricReport& report) {
    Json j = Json::object();
    const auto put = [&](const char* key, const std::optional<double>& v) {
        if (!v) return;
        if (std::isfinite(*v)) {
            j[key] = *v;
        } else {
            j[key] = *v > 0 ? "inf" : "-inf";
        }
    };
    put("kld", report.kld);
    put("mean_nll", report.mean_nll);
    put("rmse", report.rmse);
    put("mae", report.mae);
    j["n_predictions"] = report.n_predictions;
    j["n_fallbacks"] = report.n_fallbacks;
    j["diagnostics"] = report.diagnostics;
    return j;
}

struct PredictionRecord {
    std::size_t sample_id = 0;  // 1-based
    std::size_t variable = 0;   // 1-based
    int truth = 0;
    double prediction = 0.0;
};

/// CSV "sample_id,variable,truth,prediction".
inline std::string predictions_csv(const std::vector<PredictionRecord>& records) {
    std::string s = "sample_id,variable,truth,prediction\n";
    for (const auto& p : records) {
        s += std::to_string(p.sample_id) + "," + std::to_string(p.variable) + "," + std::to_string(p.truth) + "," +
             format_real(p.prediction) + "\n";
    }
    return s;
}

/// Audit record of a split: seed, fractions, unit and the per-part counts.
inline Json split_manifest_json(const SplitSpec& spec, const SplitResult& result) {
    Json j;
    j["seed"] = spec.seed;
    j["unit"] = spec.unit == SplitUnit::per_rating ? "per_rating" : "per_column";
    j["fractions"] = {{"train", spec.train_fraction},
                      {"validation", spec.validation_fraction},
                      {"test", spec.test_fraction}};
    j["counts"] = {{"train", result.counts[0]}, {"validation", result.counts[1]}, {"test", result.counts[2]}};
    j["observed_cells"] = {{"train", result.train.total_observed()},
                           {"validation", result.validation.total_observed()},
                           {"test", result.test.total_observed()}};
    j["warnings"] = result.warnings;
    return j;
}

}  // namespace pmfvb
