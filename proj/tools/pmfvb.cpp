// pmfvb: command-line driver.
//
//   pmfvb synth   --n-vars 5 --cards 10 --rank 5 --samples 100000 --outage 0.3 --seed 1 --out-dir d
//   pmfvb fit     --input d/data.csv --algorithm vb --out-dir f
//   pmfvb fit     --from-manifest f/manifest.json --out-dir f2
//   pmfvb eval    --model f/model.json --truth-model d/model.json --out-dir e
//   pmfvb predict --model f/model.json --input rows.csv --out preds.csv
//   pmfvb ingest  --ratings ratings.csv --top-n 50 --out-dir r
//   pmfvb split   --input r/data.csv --out-dir s
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 stopped at max-iters
// or max-runtime without converging.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>

#include "pmfvb/pmfvb.hpp"

namespace fs = std::filesystem;
using pmfvb::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNotConverged = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string sha256_file(const std::string& path) {
    const std::string bytes = pmfvb::read_text_file(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    char b[3];
    for (unsigned int k = 0; k < len; ++k) {
        std::snprintf(b, sizeof b, "%02x", md[k]);
        hex += b;
    }
    return hex;
}

/// Manifest split into the reproducible part (embedded in outputs) and the
/// run-specific part (manifest.json only).
struct Manifest {
    Json deterministic = Json::object();
    std::vector<std::string> argv;
    std::string started;

    Manifest(const std::string& command, int argc, char** argv_in) : argv(argv_in, argv_in + argc), started(utc_now()) {
        deterministic["command"] = command;
        deterministic["library_version"] = pmfvb::kVersion;
    }

    void write(const fs::path& dir) const {
        Json j = deterministic;
        j["command_line"] = argv;
        j["started_utc"] = started;
        j["finished_utc"] = utc_now();
        pmfvb::write_text_file((dir / "manifest.json").string(), j.dump(2) + "\n");
    }
};

fs::path prepare_dir(const std::string& dir) {
    if (dir.empty()) throw UsageError("--out-dir is required");
    fs::create_directories(dir);
    return fs::path(dir);
}

std::vector<int> expand_cards(const std::vector<int>& cards, std::size_t n_vars) {
    if (cards.size() == 1) return std::vector<int>(n_vars, cards.front());
    if (cards.size() != n_vars) throw UsageError("--cards needs one value or exactly --n-vars values");
    return cards;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::size_t n_vars = 5;
    std::vector<int> cards{10};
    std::size_t rank = 5;
    std::size_t samples = 100000;
    double outage = 0.0;
    std::uint64_t seed = 1;
    std::string out_dir;
};

int run_synth(const SynthArgs& a, Manifest manifest) {
    if (a.n_vars < 1 || a.rank < 1) throw UsageError("--n-vars and --rank must be positive");
    if (!(a.outage >= 0.0 && a.outage <= 1.0)) throw UsageError("--outage must lie in [0, 1]");
    const auto cards = expand_cards(a.cards, a.n_vars);
    for (int c : cards) {
        if (c < 2) throw UsageError("every cardinality must be at least 2");
    }
    const auto dir = prepare_dir(a.out_dir);
    const auto model = pmfvb::sample_model(a.n_vars, cards, a.rank, a.seed);
    const auto data = pmfvb::sample_dataset(model, a.samples, a.outage, a.seed);
    manifest.deterministic["config"] = {{"n_vars", a.n_vars}, {"cards", cards},   {"rank", a.rank},
                                        {"samples", a.samples}, {"outage", a.outage}, {"seed", a.seed}};
    pmfvb::save_model((dir / "model.json").string(), model, manifest.deterministic);
    pmfvb::save_dense_csv((dir / "data.csv").string(), data);
    manifest.write(dir);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string input;
    std::string algorithm = "vb";
    std::size_t init_rank = 0;
    std::size_t init_rank_cap = 64;
    double alpha_lambda = 1e-6;
    double alpha_factor = 1.0;
    double prune_eps = 1e-3;
    double tol = 1e-7;
    std::string tol_mode;
    std::size_t max_iters = 0;
    std::size_t batch_size = 0;
    double holdout_frac = 0.1;
    std::string convergence;
    double max_runtime = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir;
    std::string from_manifest;

    Json to_json() const {
        return {{"input", input},
                {"algorithm", algorithm},
                {"init_rank", init_rank},
                {"init_rank_cap", init_rank_cap},
                {"alpha_lambda", alpha_lambda},
                {"alpha_factor", alpha_factor},
                {"prune_eps", prune_eps},
                {"tol", tol},
                {"tol_mode", tol_mode},
                {"max_iters", max_iters},
                {"batch_size", batch_size},
                {"holdout_frac", holdout_frac},
                {"convergence", convergence},
                {"max_runtime", max_runtime},
                {"seed", seed}};
    }

    void load(const Json& j) {
        input = j.at("input").get<std::string>();
        algorithm = j.at("algorithm").get<std::string>();
        init_rank = j.at("init_rank").get<std::size_t>();
        init_rank_cap = j.at("init_rank_cap").get<std::size_t>();
        alpha_lambda = j.at("alpha_lambda").get<double>();
        alpha_factor = j.at("alpha_factor").get<double>();
        prune_eps = j.at("prune_eps").get<double>();
        tol = j.at("tol").get<double>();
        tol_mode = j.at("tol_mode").get<std::string>();
        max_iters = j.at("max_iters").get<std::size_t>();
        batch_size = j.at("batch_size").get<std::size_t>();
        holdout_frac = j.at("holdout_frac").get<double>();
        convergence = j.at("convergence").get<std::string>();
        max_runtime = j.at("max_runtime").get<double>();
        seed = j.at("seed").get<std::uint64_t>();
    }
};

std::size_t default_init_rank(std::span<const int> cards, std::size_t cap) {
    std::size_t k = cards.size() >= 2 ? pmfvb::kruskal_max_rank(cards) : 0;
    if (k == 0 || k > cap) k = cap;
    return k;
}

int run_fit(FitArgs a, Manifest manifest) {
    if (!a.from_manifest.empty()) {
        const std::string out_dir = a.out_dir;
        Json m;
        try {
            m = Json::parse(pmfvb::read_text_file(a.from_manifest));
            a.load(m.at("config"));
        } catch (const Json::exception& e) {
            throw pmfvb::ParseError(a.from_manifest + ": not a fit manifest (" + e.what() + ")");
        }
        a.out_dir = out_dir;
        const std::string recorded = m.at("input_sha256").get<std::string>();
        if (sha256_file(a.input) != recorded) {
            throw pmfvb::ParseError("input '" + a.input + "' no longer matches the digest in the manifest");
        }
    }
    if (a.input.empty()) throw UsageError("--input is required");
    if (a.algorithm != "vb" && a.algorithm != "svb") throw UsageError("--algorithm must be vb or svb");
    if (a.convergence.empty()) a.convergence = a.algorithm == "vb" ? "elbo" : "nll";
    if (a.convergence != "elbo" && a.convergence != "nll") throw UsageError("--convergence must be elbo or nll");
    if (a.algorithm == "svb" && a.convergence == "elbo") throw UsageError("svb only supports --convergence nll");
    if (a.tol_mode.empty()) a.tol_mode = a.convergence == "elbo" ? "absolute" : "relative";
    if (a.tol_mode != "absolute" && a.tol_mode != "relative") {
        throw UsageError("--tol-mode must be absolute or relative");
    }
    if (a.max_iters == 0) a.max_iters = a.algorithm == "vb" ? 20000 : 100000;
    const unsigned threads = a.threads > 0 ? a.threads : pmfvb::default_threads();

    const auto data = pmfvb::load_dense_csv(a.input);
    const auto dir = prepare_dir(a.out_dir);

    pmfvb::FitConfig base;
    base.alpha_lambda = a.alpha_lambda;
    base.alpha_factor = a.alpha_factor;
    base.init_rank = a.init_rank > 0 ? a.init_rank : default_init_rank(data.cardinalities(), a.init_rank_cap);
    base.prune_eps = a.prune_eps;
    base.tol = a.tol;
    base.tol_mode = a.tol_mode == "absolute" ? pmfvb::ToleranceMode::absolute : pmfvb::ToleranceMode::relative;
    base.max_iters = a.max_iters;
    base.seed = a.seed;
    base.convergence = a.convergence == "elbo" ? pmfvb::Convergence::elbo : pmfvb::Convergence::heldout_nll;
    base.holdout_fraction = (a.algorithm == "svb" || a.convergence == "nll") ? a.holdout_frac : 0.0;
    base.threads = threads;
    try {
        base.validate();
    } catch (const pmfvb::DomainError& e) {
        throw UsageError(e.what());
    }

    pmfvb::FitResult result;
    if (a.algorithm == "vb") {
        result = pmfvb::vb_fit(data, base);
    } else {
        pmfvb::SviConfig config(base);
        config.batch_size = a.batch_size;
        config.max_runtime_seconds = a.max_runtime;
        result = pmfvb::svb_fit(data, config);
    }

    manifest.deterministic["config"] = a.to_json();
    manifest.deterministic["resolved_init_rank"] = base.init_rank;
    manifest.deterministic["seeds"] = {{"init", a.seed}, {"minibatch", a.seed}, {"holdout", a.seed}};
    manifest.deterministic["input_sha256"] = sha256_file(a.input);

    pmfvb::save_model((dir / "model.json").string(), result.model, manifest.deterministic);
    Json metrics = pmfvb::fit_metrics_json(result);
    metrics["manifest"] = manifest.deterministic;
    pmfvb::write_text_file((dir / "metrics.json").string(), metrics.dump(2) + "\n");
    if (!result.elbo_trace.empty()) pmfvb::write_text_file((dir / "elbo.csv").string(), pmfvb::elbo_trace_csv(result));
    if (!result.heldout_nll_trace.empty()) {
        pmfvb::write_text_file((dir / "nll.csv").string(), pmfvb::nll_trace_csv(result));
    }
    manifest.write(dir);
    std::cout << "detected_rank " << result.detected_rank << " iterations " << result.iterations << " stop "
              << pmfvb::to_string(result.stop) << "\n";
    return result.converged() ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model;
    std::string truth_model;
    std::string test_data;
    std::uint64_t seed = 0;
    std::uint64_t kld_cap = pmfvb::kDefaultKldCellCap;
    unsigned threads = 0;
    bool write_predictions = false;
    std::string out_dir;
};

int run_eval(const EvalArgs& a, Manifest manifest) {
    if (a.model.empty()) throw UsageError("--model is required");
    if (a.truth_model.empty() && a.test_data.empty()) {
        throw UsageError("eval needs --truth-model and/or --test-data");
    }
    const unsigned threads = a.threads > 0 ? a.threads : pmfvb::default_threads();
    const auto dir = prepare_dir(a.out_dir);
    const auto model = pmfvb::load_model(a.model);
    pmfvb::MetricReport report;
    Json inputs = {{"model_sha256", sha256_file(a.model)}};
    std::vector<pmfvb::PredictionRecord> records;

    if (!a.truth_model.empty()) {
        const auto truth = pmfvb::load_model(a.truth_model);
        inputs["truth_model_sha256"] = sha256_file(a.truth_model);
        const auto k = pmfvb::kld_full(truth, model, threads, a.kld_cap);
        report.kld = k.value;
        if (k.diagnostic) report.diagnostics.push_back(*k.diagnostic);
    }
    if (!a.test_data.empty()) {
        const auto test = pmfvb::load_dense_csv(a.test_data);
        inputs["test_data_sha256"] = sha256_file(a.test_data);
        if (test.num_vars() != model.num_vars()) throw pmfvb::ParseError("test data and model differ in N");
        for (std::size_t n = 0; n < test.num_vars(); ++n) {
            if (test.cardinality(n) > model.cardinality(n)) {
                throw pmfvb::ParseError("test data cardinality exceeds the model's for variable " +
                                        std::to_string(n + 1));
            }
        }
        // Re-home the test data on the model's cardinalities.
        const std::vector<int> cards(model.cardinalities().begin(), model.cardinalities().end());
        const pmfvb::Dataset aligned(cards, test.num_samples(), {test.raw().begin(), test.raw().end()});
        const auto nll = pmfvb::mean_nll(model, aligned, threads);
        report.mean_nll = nll.value;
        if (nll.diagnostic) report.diagnostics.push_back(*nll.diagnostic);

        const auto hidden = pmfvb::hide_one(aligned, a.seed);
        std::vector<double> preds;
        std::vector<double> truths;
        for (const auto& h : hidden.entries) {
            const auto p = pmfvb::predict_entry(model, hidden.context.sample(h.column), h.variable);
            preds.push_back(p.value);
            truths.push_back(h.truth);
            report.n_fallbacks += p.fallback;
            records.push_back({h.column + 1, h.variable + 1, h.truth, p.value});
        }
        report.n_predictions = preds.size();
        if (!preds.empty()) {
            const auto err = pmfvb::rmse_mae(preds, truths);
            report.rmse = err.rmse;
            report.mae = err.mae;
        }
        if (hidden.skipped > 0) {
            report.diagnostics.push_back(std::to_string(hidden.skipped) +
                                         " test samples have fewer than two observed entries and were skipped");
        }
    }
    manifest.deterministic["config"] = {{"seed", a.seed}, {"kld_cap", a.kld_cap}};
    manifest.deterministic["inputs"] = inputs;
    Json out = pmfvb::metric_report_json(report);
    out["manifest"] = manifest.deterministic;
    pmfvb::write_text_file((dir / "eval.json").string(), out.dump(2) + "\n");
    if (a.write_predictions && !records.empty()) {
        pmfvb::write_text_file((dir / "predictions.csv").string(), pmfvb::predictions_csv(records));
    }
    manifest.write(dir);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string input;
    std::string out;
};

int run_predict(const PredictArgs& a) {
    if (a.model.empty() || a.input.empty() || a.out.empty()) throw UsageError("--model, --input and --out are required");
    const auto model = pmfvb::load_model(a.model);
    const std::string text = pmfvb::read_text_file(a.input);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string_view> fields;
    std::string out = "row,variable,expected\n";
    std::size_t line_no = 0;
    std::size_t row = 0;
    std::size_t bad = 0;
    std::vector<pmfvb::Category> y(model.num_vars());
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = pmfvb::detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        ++row;
        pmfvb::detail::split_fields(t, fields);
        try {
            if (fields.size() != model.num_vars()) {
                throw pmfvb::ParseError("expected " + std::to_string(model.num_vars()) + " fields", line_no);
            }
            std::optional<std::size_t> target;
            for (std::size_t n = 0; n < fields.size(); ++n) {
                if (pmfvb::detail::trim(fields[n]) == "?") {
                    if (target) throw pmfvb::ParseError("more than one '?' in the row", line_no, n + 1);
                    target = n;
                    y[n] = pmfvb::kMissing;
                    continue;
                }
                const long long v = pmfvb::detail::parse_int(fields[n], line_no, n + 1);
                if (v < 0 || v > model.cardinality(n)) {
                    throw pmfvb::ParseError("category out of range", line_no, n + 1);
                }
                y[n] = static_cast<pmfvb::Category>(v);
            }
            if (!target) throw pmfvb::ParseError("no '?' in the row", line_no);
            const auto p = pmfvb::predict_entry(model, y, *target);
            out += std::to_string(row) + "," + std::to_string(*target + 1) + "," + pmfvb::format_real(p.value) + "\n";
        } catch (const pmfvb::ParseError& e) {
            ++bad;
            std::cerr << a.input << ": " << e.what() << "\n";
        }
    }
    pmfvb::write_text_file(a.out, out);
    return bad > 0 ? kExitData : kExitOk;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string ratings;
    std::size_t top_n = 50;
    std::size_t min_rated = 2;
    std::string out_dir;
};

int run_ingest(const IngestArgs& a, Manifest manifest) {
    if (a.ratings.empty()) throw UsageError("--ratings is required");
    pmfvb::RatingsIngestSpec spec;
    spec.top_n_items = a.top_n;
    spec.min_rated_items = a.min_rated;
    const auto dir = prepare_dir(a.out_dir);
    const auto m = pmfvb::ingest_ratings_csv(a.ratings, spec);
    pmfvb::save_dense_csv((dir / "data.csv").string(), m.data);
    manifest.deterministic["config"] = {{"top_n", a.top_n}, {"min_rated", a.min_rated}};
    manifest.deterministic["input_sha256"] = sha256_file(a.ratings);
    Json ids = {{"item_ids", m.item_ids}, {"user_ids", m.user_ids}, {"dropped_users", m.dropped_users}};
    ids["manifest"] = manifest.deterministic;
    pmfvb::write_text_file((dir / "ids.json").string(), ids.dump() + "\n");
    manifest.write(dir);
    return kExitOk;
}

struct SplitArgs {
    std::string input;
    double train = 0.7;
    double validation = 0.1;
    double test = 0.2;
    std::string unit = "per_rating";
    std::uint64_t seed = 0;
    std::string out_dir;
};

int run_split(const SplitArgs& a, Manifest manifest) {
    if (a.input.empty()) throw UsageError("--input is required");
    pmfvb::SplitSpec spec;
    spec.train_fraction = a.train;
    spec.validation_fraction = a.validation;
    spec.test_fraction = a.test;
    if (a.unit != "per_rating" && a.unit != "per_column") throw UsageError("--unit must be per_rating or per_column");
    spec.unit = a.unit == "per_rating" ? pmfvb::SplitUnit::per_rating : pmfvb::SplitUnit::per_column;
    spec.seed = a.seed;
    try {
        spec.validate();
    } catch (const pmfvb::DomainError& e) {
        throw UsageError(e.what());
    }
    const auto data = pmfvb::load_dense_csv(a.input);
    const auto dir = prepare_dir(a.out_dir);
    const auto parts = pmfvb::split(data, spec);
    for (const auto& w : parts.warnings) std::cerr << "warning: " << w << "\n";
    pmfvb::save_dense_csv((dir / "train.csv").string(), parts.train);
    pmfvb::save_dense_csv((dir / "validation.csv").string(), parts.validation);
    pmfvb::save_dense_csv((dir / "test.csv").string(), parts.test);
    Json j = pmfvb::split_manifest_json(spec, parts);
    manifest.deterministic["input_sha256"] = sha256_file(a.input);
    j["manifest"] = manifest.deterministic;
    pmfvb::write_text_file((dir / "split.json").string(), j.dump(2) + "\n");
    manifest.write(dir);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint PMF estimation with variational Bayesian CPD models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pmfvb::kVersion));

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Draw a random ground-truth model and a dataset from it");
    s->add_option("--n-vars", synth.n_vars, "Number of variables N")->required();
    s->add_option("--cards", synth.cards, "Cardinality (one value or one per variable)")->required()->delimiter(',');
    s->add_option("--rank", synth.rank, "True rank R")->required();
    s->add_option("--samples", synth.samples, "Number of samples T")->required();
    s->add_option("--outage", synth.outage, "Probability that an entry is missing");
    s->add_option("--seed", synth.seed, "Seed");
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Fit a model with VB (vb) or stochastic VB (svb)");
    f->add_option("--input", fit.input, "Dense CSV dataset");
    f->add_option("--algorithm", fit.algorithm, "vb or svb")->capture_default_str();
    f->add_option("--init-rank", fit.init_rank, "Initial rank (default: Kruskal bound, capped)");
    f->add_option("--init-rank-cap", fit.init_rank_cap, "Cap on the default initial rank")->capture_default_str();
    f->add_option("--alpha-lambda", fit.alpha_lambda, "Loading prior concentration")->capture_default_str();
    f->add_option("--alpha-factor", fit.alpha_factor, "Factor prior concentration")->capture_default_str();
    f->add_option("--prune-eps", fit.prune_eps, "Pruning threshold")->capture_default_str();
    f->add_option("--tol", fit.tol, "Convergence tolerance")->capture_default_str();
    f->add_option("--tol-mode", fit.tol_mode,
                  "absolute or relative change (default absolute for elbo, relative for nll)");
    f->add_option("--max-iters", fit.max_iters, "Iteration cap (default 20000 for vb, 100000 for svb)");
    f->add_option("--batch-size", fit.batch_size, "svb minibatch size (default ceil(sqrt(T)))");
    f->add_option("--holdout-frac", fit.holdout_frac, "Held-out fraction for NLL convergence")->capture_default_str();
    f->add_option("--convergence", fit.convergence, "elbo or nll (default elbo for vb, nll for svb)");
    f->add_option("--max-runtime", fit.max_runtime, "svb wall-clock cap in seconds (0 = none)");
    f->add_option("--seed", fit.seed, "Seed");
    f->add_option("--threads", fit.threads, "Worker threads (default PMFVB_THREADS or 1)");
    f->add_option("--out-dir", fit.out_dir, "Output directory")->required();
    f->add_option("--from-manifest", fit.from_manifest, "Re-run the fit recorded in a manifest.json");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a model against a truth model and/or test data");
    e->add_option("--model", ev.model, "Model JSON")->required();
    e->add_option("--truth-model", ev.truth_model, "Ground-truth model JSON (enables KLD)");
    e->add_option("--test-data", ev.test_data, "Dense CSV test data (enables NLL, RMSE, MAE)");
    e->add_option("--seed", ev.seed, "Seed for the hide-one protocol");
    e->add_option("--kld-cap", ev.kld_cap, "Maximum tensor cells for KLD enumeration")->capture_default_str();
    e->add_option("--threads", ev.threads, "Worker threads");
    e->add_flag("--write-predictions", ev.write_predictions, "Also write predictions.csv");
    e->add_option("--out-dir", ev.out_dir, "Output directory")->required();

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Conditional-expectation prediction of entries marked '?'");
    p->add_option("--model", pr.model, "Model JSON")->required();
    p->add_option("--input", pr.input, "CSV rows with exactly one '?' each")->required();
    p->add_option("--out", pr.out, "Output CSV")->required();

    IngestArgs in;
    auto* ig = app.add_subcommand("ingest", "Build an item x user dataset from a ratings CSV");
    ig->add_option("--ratings", in.ratings, "userId,movieId,rating[,timestamp] CSV")->required();
    ig->add_option("--top-n", in.top_n, "Number of most-rated items to keep")->capture_default_str();
    ig->add_option("--min-rated", in.min_rated, "Minimum ratings per kept user")->capture_default_str();
    ig->add_option("--out-dir", in.out_dir, "Output directory")->required();

    SplitArgs sp;
    auto* sl = app.add_subcommand("split", "Train/validation/test split of a dense dataset");
    sl->add_option("--input", sp.input, "Dense CSV dataset")->required();
    sl->add_option("--train", sp.train, "Train fraction")->capture_default_str();
    sl->add_option("--validation", sp.validation, "Validation fraction")->capture_default_str();
    sl->add_option("--test", sp.test, "Test fraction")->capture_default_str();
    sl->add_option("--unit", sp.unit, "per_rating or per_column")->capture_default_str();
    sl->add_option("--seed", sp.seed, "Seed");
    sl->add_option("--out-dir", sp.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*s) return run_synth(synth, Manifest("synth", argc, argv));
        if (*f) return run_fit(fit, Manifest("fit", argc, argv));
        if (*e) return run_eval(ev, Manifest("eval", argc, argv));
        if (*p) return run_predict(pr);
        if (*ig) return run_ingest(in, Manifest("ingest", argc, argv));
        if (*sl) return run_split(sp, Manifest("split", argc, argv));
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const pmfvb::ParseError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const pmfvb::IngestError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const pmfvb::ConfigError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const pmfvb::DomainError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
