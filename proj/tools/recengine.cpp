// Command-line front end: generation, validation, extraction, training,
// evaluation, coverage, batch recommendation, effect/power analysis, and the
// end-to-end pipeline. Exit codes: 0 success, 1 validation/usage error,
// 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recengine/analysis.hpp"
#include "recengine/batcher.hpp"
#include "recengine/config.hpp"
#include "recengine/evaluation.hpp"
#include "recengine/event_log.hpp"
#include "recengine/feedback.hpp"
#include "recengine/model_io.hpp"
#include "recengine/models.hpp"
#include "recengine/rng.hpp"
#include "recengine/synthetic.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Bad inputs the user can fix (exit 1), as opposed to failures mid-run (2).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path, const char* flag) {
    if (path.empty()) throw ValidationError(std::string("missing required ") + flag);
    std::ifstream is(path);
    if (!is) throw ValidationError(std::string(flag) + ": cannot open '" + path + "'");
}

rec::EventLog load_log(const std::string& path, const char* flag = "--log") {
    require_readable(path, flag);
    try {
        return rec::parse_event_log_file(path);
    } catch (const std::exception& e) {
        throw ValidationError(std::string(flag) + ": " + e.what());
    }
}

rec::ScorerModel load_model(const std::string& path, const char* flag = "--model") {
    require_readable(path, flag);
    try {
        return rec::read_model_file(path);
    } catch (const std::exception& e) {
        throw ValidationError(std::string(flag) + ": " + e.what());
    }
}

rec::FeatureConfig make_feature_config(int text_dim, const std::string& blocks) {
    if (text_dim < 1) throw ValidationError("--text-dim must be positive");
    rec::FeatureConfig f;
    f.text_dim = text_dim;
    f.use_text = f.use_activity = f.use_network = false;
    if (blocks.empty()) throw ValidationError("--features needs at least one of t, a, n");
    for (char c : blocks) {
        switch (c) {
            case 't': f.use_text = true; break;
            case 'a': f.use_activity = true; break;
            case 'n': f.use_network = true; break;
            default:
                throw ValidationError(std::string("--features: unknown block '") + c +
                                      "' (use letters t, a, n)");
        }
    }
    return f;
}

rec::EmbedderSpec make_embedder_spec(const std::string& kind, int dim, std::uint64_t seed,
                                     const std::string& table) {
    rec::EmbedderSpec spec;
    spec.dim = dim;
    spec.seed = seed;
    if (kind == "hashing") {
        spec.kind = rec::EmbedderSpec::Kind::hashing;
    } else if (kind == "precomputed") {
        spec.kind = rec::EmbedderSpec::Kind::precomputed;
        require_readable(table, "--embedding-table");
        spec.table_path = table;
    } else {
        throw ValidationError("--embedder must be 'hashing' or 'precomputed'");
    }
    return spec;
}

struct SplitFlags {
    double train_frac = 0.8;
    double val_frac = 0.1;
    std::int64_t train_end_ts = 0;
    std::int64_t val_end_ts = 0;
    std::int64_t test_end_ts = 0;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--train-frac", train_frac,
                        "Fraction of initiations for training (default 0.8)");
        cmd->add_option("--val-frac", val_frac,
                        "Fraction of initiations for validation (default 0.1)");
        cmd->add_option("--train-end-ts", train_end_ts,
                        "Explicit train/validation boundary (ms); overrides fractions");
        cmd->add_option("--val-end-ts", val_end_ts,
                        "Explicit validation/test boundary (ms)");
        cmd->add_option("--test-end-ts", test_end_ts,
                        "Explicit end of the test window (ms; default unbounded)");
    }

    rec::SplitSpec resolve(const std::vector<rec::Initiation>& inits) const {
        if (train_end_ts != 0 || val_end_ts != 0) {
            if (train_end_ts == 0 || val_end_ts == 0) {
                throw ValidationError(
                    "--train-end-ts and --val-end-ts must be given together");
            }
            rec::SplitSpec spec;
            spec.train_end_ts = train_end_ts;
            spec.validation_end_ts = val_end_ts;
            spec.test_end_ts =
                test_end_ts != 0 ? test_end_ts : std::numeric_limits<std::int64_t>::max();
            rec::validate_split(spec);
            return spec;
        }
        try {
            return rec::split_from_fractions(inits, train_frac, val_frac);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
};

void emit_provenance(const std::string& path, const std::string& command, std::uint64_t seed,
                     const rec::Config& cfg,
                     const std::vector<std::pair<std::string, std::string>>& inputs,
                     const std::vector<std::string>& output_paths) {
    std::vector<std::pair<std::string, std::string>> outputs;
    outputs.reserve(output_paths.size());
    for (const auto& p : output_paths) outputs.emplace_back(p, rec::file_hash_hex(p));
    rec::write_provenance_file(path, rec::provenance_json(command, seed, cfg, inputs, outputs));
}

ordered_json metrics_json(const rec::MetricsReport& m) {
    return ordered_json{{"mrr", m.mrr},
                        {"hr1", m.hr1},
                        {"hr5", m.hr5},
                        {"n_evaluated", m.n_evaluated},
                        {"median_candidates", m.median_candidates}};
}

ordered_json coverage_json(const rec::CoverageReport& c) {
    return ordered_json{{"n_sampled", c.n_sampled},
                        {"k", c.k},
                        {"sample_short", c.sample_short},
                        {"r_size", c.r_size},
                        {"pct_unique", c.pct_unique},
                        {"mmst_weeks", c.mmst_weeks},
                        {"siloed_pct_recced", c.siloed_pct_recced},
                        {"siloed_pct_unrecced", c.siloed_pct_unrecced},
                        {"siloed_ratio", c.siloed_ratio}};
}

ordered_json effect_json(const rec::EffectEstimate& e) {
    return ordered_json{{"method", rec::effect_method_name(e.method)},
                        {"point", e.point},
                        {"ci", {e.ci_low, e.ci_high}},
                        {"n_treated", e.n_treated},
                        {"n_control", e.n_control},
                        {"n_bootstrap", e.n_bootstrap},
                        {"seed", e.seed}};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os << text;
}

std::vector<std::string> read_name_list(const std::string& path, const char* flag) {
    require_readable(path, flag);
    std::ifstream is(path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t b = 0, e = line.size();
        while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
        const std::string name = line.substr(b, e - b);
        if (name.empty() || name[0] == '#') continue;
        names.push_back(name);
    }
    return names;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

// Site names in the "site" column of earlier manifest.csv files.
std::vector<std::string> manifest_sites(const std::string& path, const char* flag) {
    require_readable(path, flag);
    std::ifstream is(path);
    std::string line;
    std::vector<std::string> sites;
    int site_col = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (site_col < 0) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "site") site_col = static_cast<int>(i);
            }
            if (site_col < 0) {
                throw ValidationError(std::string(flag) + ": '" + path +
                                      "' has no 'site' column");
            }
            continue;
        }
        if (static_cast<int>(fields.size()) > site_col) {
            sites.push_back(fields[static_cast<std::size_t>(site_col)]);
        }
    }
    return sites;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
    std::string out;
    std::string config_path;
    rec::SyntheticConfig synth;
    bool json = false;
};

// Explicit flags beat config values beat built-in defaults.
void merge_generate_config(GenerateArgs& a, const CLI::App* cmd, const rec::Config& cfg) {
    auto pick_int = [&](const char* flag, const char* key, auto& slot) {
        if (cmd->count(flag) == 0 && cfg.has(key)) {
            slot = static_cast<std::remove_reference_t<decltype(slot)>>(cfg.get_int(key));
        }
    };
    auto pick_dbl = [&](const char* flag, const char* key, double& slot) {
        if (cmd->count(flag) == 0 && cfg.has(key)) slot = cfg.get_double(key);
    };
    pick_int("--authors", "authors", a.synth.n_authors);
    pick_int("--sites", "sites", a.synth.n_sites);
    pick_int("--days", "days", a.synth.horizon_days);
    pick_int("--topics", "topics", a.synth.n_topics);
    pick_int("--seed", "seed", a.synth.seed);
    pick_int("--start-ts", "start_ts", a.synth.start_ts);
    pick_dbl("--homophily", "homophily", a.synth.homophily);
    pick_dbl("--popularity-skew", "popularity_skew", a.synth.popularity_skew);
    pick_dbl("--coauthor-prob", "coauthor_prob", a.synth.coauthor_prob);
    pick_dbl("--rate-journal", "rate_journal", a.synth.rate_journal);
    pick_dbl("--rate-reaction", "rate_reaction", a.synth.rate_reaction);
    pick_dbl("--rate-comment", "rate_comment", a.synth.rate_comment);
    pick_dbl("--rate-guestbook", "rate_guestbook", a.synth.rate_guestbook);
    pick_dbl("--rate-visit", "rate_visit", a.synth.rate_visit);
    pick_dbl("--rate-follow", "rate_follow", a.synth.rate_follow);
}

int run_generate(const GenerateArgs& a, const rec::Config& cfg) {
    const auto log = rec::generate_synthetic_log(a.synth);
    if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    rec::write_event_log_file(log, a.out);
    std::vector<std::pair<std::string, std::string>> inputs;
    if (!a.config_path.empty()) {
        inputs.emplace_back(a.config_path, rec::file_hash_hex(a.config_path));
    }
    emit_provenance(a.out + ".provenance.json", "generate", a.synth.seed, cfg, inputs, {a.out});

    ordered_json j{{"out", a.out},
                   {"events", log.size()},
                   {"users", log.n_users()},
                   {"sites", log.n_sites()},
                   {"seed", a.synth.seed}};
    if (a.json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "wrote " << log.size() << " events (" << log.n_users() << " users, "
                  << log.n_sites() << " sites) to " << a.out << "\n";
    }
    return 0;
}

// ---- validate --------------------------------------------------------------

int run_validate(const std::string& log_path, bool json) {
    const auto log = load_log(log_path);
    const auto inits = rec::extract_initiations(log);
    int n_authors = 0;
    for (int u = 0; u < log.n_users(); ++u) {
        if (log.first_update_ts(u) != rec::kNever) ++n_authors;
    }
    const std::int64_t first_ts = log.size() ? log.records().front().ts : 0;
    const std::int64_t last_ts = log.size() ? log.records().back().ts : 0;

    ordered_json j{{"log", log_path},
                   {"events", log.size()},
                   {"users", log.n_users()},
                   {"authors", n_authors},
                   {"sites", log.n_sites()},
                   {"initiations", inits.size()},
                   {"sort_warnings", log.sort_warnings()},
                   {"first_ts", first_ts},
                   {"last_ts", last_ts},
                   {"span_days",
                    log.size() ? static_cast<double>(last_ts - first_ts) / rec::kMsPerDay : 0.0}};
    if (json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << log_path << ": " << log.size() << " events, " << log.n_users() << " users ("
                  << n_authors << " authors), " << log.n_sites() << " sites, " << inits.size()
                  << " initiations";
        if (log.sort_warnings() > 0) {
            std::cout << ", " << log.sort_warnings() << " out-of-order records sorted";
        }
        std::cout << "\n";
    }
    return 0;
}

// ---- extract ---------------------------------------------------------------

int run_extract(const std::string& log_path, const std::string& out, const SplitFlags& split,
                const std::string& which, std::uint64_t seed, bool json) {
    const auto log = load_log(log_path);
    const auto inits = rec::extract_initiations(log);
    if (inits.empty()) throw ValidationError("log contains no initiations to extract");

    std::vector<rec::Initiation> chosen;
    if (which == "all") {
        chosen = inits;
    } else {
        const auto parts = rec::chronological_split(inits, split.resolve(inits));
        if (which == "train") chosen = parts.train;
        else if (which == "validation") chosen = parts.validation;
        else if (which == "test") chosen = parts.test;
        else throw ValidationError("--split must be train, validation, test, or all");
    }

    const auto set = rec::build_training_samples(log, chosen, seed);
    if (const auto parent = fs::path(out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    rec::write_training_samples_file(set, log, out, rec::file_hash_hex(log_path));
    rec::Config cfg;
    emit_provenance(out + ".provenance.json", "extract", seed, cfg,
                    {{log_path, rec::file_hash_hex(log_path)}}, {out});

    ordered_json j{{"out", out},
                   {"initiations", inits.size()},
                   {"split", which},
                   {"split_initiations", chosen.size()},
                   {"samples", set.samples.size()},
                   {"skipped_no_source_pair", set.n_skipped_no_source_pair},
                   {"skipped_no_target_pair", set.n_skipped_no_target_pair},
                   {"positives_without_negative", set.n_without_negative},
                   {"seed", seed}};
    if (json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "extracted " << set.samples.size() << " samples from " << chosen.size()
                  << " " << which << " initiations (of " << inits.size() << " total) to " << out
                  << "\n";
    }
    return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string log_path;
    std::string model_out;
    std::string scorer = "mlp";
    std::uint64_t seed = 1;
    int text_dim = 768;
    std::string features = "tan";
    std::string embedder = "hashing";
    std::string embedding_table;
    std::uint64_t embedder_seed = 7;
    SplitFlags split;
    rec::MlpConfig mlp;
    rec::MfConfig mf;
    bool json = false;
};

int run_train(const TrainArgs& a) {
    const auto kind = rec::scorer_kind_from_name(a.scorer);
    if (!kind) throw ValidationError("--scorer: unknown scorer '" + a.scorer + "'");
    const auto log = load_log(a.log_path);
    const auto fcfg = make_feature_config(a.text_dim, a.features);
    const auto espec =
        make_embedder_spec(a.embedder, a.text_dim, a.embedder_seed, a.embedding_table);
    if (a.model_out.empty()) throw ValidationError("missing required --model-out");

    const auto inits = rec::extract_initiations(log);
    rec::ScorerModel model;
    ordered_json train_info;
    if (*kind == rec::ScorerKind::mlp || *kind == rec::ScorerKind::matrix_factorization) {
        if (inits.empty()) throw ValidationError("log contains no initiations to train on");
        const auto parts = rec::chronological_split(inits, a.split.resolve(inits));
        if (parts.train.empty()) throw ValidationError("training split is empty");
        const auto samples = rec::build_training_samples(log, parts.train, a.seed);
        if (samples.samples.empty()) {
            throw ValidationError("no usable training samples (all initiations skipped)");
        }
        if (*kind == rec::ScorerKind::mlp) {
            rec::TextEmbedder embedder(espec);
            auto cfg = a.mlp;
            cfg.seed = a.seed;
            model = rec::train_mlp_model(log, parts.train, samples.samples, embedder, fcfg, cfg);
        } else {
            auto cfg = a.mf;
            cfg.seed = a.seed;
            model = rec::train_mf_model(log, parts.train, samples.samples, fcfg, espec, cfg);
        }
        train_info = ordered_json{{"train_initiations", parts.train.size()},
                                  {"samples", samples.samples.size()},
                                  {"best_epoch", model.meta.best_epoch},
                                  {"epochs", model.meta.epochs},
                                  {"best_holdout_loss", model.meta.best_holdout_loss},
                                  {"train_rows", model.meta.n_train_rows},
                                  {"holdout_rows", model.meta.n_holdout_rows}};
    } else {
        model = rec::make_baseline(*kind, fcfg, espec, a.seed);
        train_info = ordered_json{{"note", "baseline scorer, no learned parameters"}};
    }

    if (const auto parent = fs::path(a.model_out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    rec::write_model_file(a.model_out, model);
    std::vector<std::pair<std::string, std::string>> inputs{
        {a.log_path, rec::file_hash_hex(a.log_path)}};
    if (!a.embedding_table.empty()) {
        inputs.emplace_back(a.embedding_table, rec::file_hash_hex(a.embedding_table));
    }
    rec::Config cfg;
    emit_provenance(a.model_out + ".provenance.json", "train", a.seed, cfg, inputs, {a.model_out});

    ordered_json j{{"model", a.model_out}, {"scorer", a.scorer}, {"seed", a.seed}};
    j["training"] = train_info;
    if (a.json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "trained " << a.scorer << " -> " << a.model_out;
        if (model.meta.epochs > 0) {
            std::cout << " (best epoch " << model.meta.best_epoch << "/" << model.meta.epochs
                      << ", holdout loss " << model.meta.best_holdout_loss << ")";
        }
        std::cout << "\n";
    }
    return 0;
}

// ---- evaluate ----------------------------------------------------------------

int run_evaluate(const std::string& log_path, const std::string& model_path,
                 const SplitFlags& split, const std::string& which, int threads, bool drift,
                 const std::string& out, bool json) {
    const auto log = load_log(log_path);
    const auto model = load_model(model_path);
    const auto inits = rec::extract_initiations(log);
    if (inits.empty()) throw ValidationError("log contains no initiations to evaluate");
    const auto spec = split.resolve(inits);
    const auto parts = rec::chronological_split(inits, spec);
    const auto& targets = which == "validation" ? parts.validation : parts.test;
    if (which != "validation" && which != "test") {
        throw ValidationError("--split must be validation or test");
    }
    if (targets.empty()) throw ValidationError("the " + which + " split is empty");

    const rec::TextEmbedder embedder(model.embedder);
    const auto run = rec::rank_targets(model, log, inits, targets, embedder, threads);
    if (run.results.empty()) {
        throw ValidationError("every target in the " + which + " split was skipped");
    }
    const auto metrics = rec::compute_metrics(run.results);

    ordered_json j{{"model", model_path},
                   {"scorer", rec::scorer_kind_name(model.kind)},
                   {"split", which},
                   {"targets", targets.size()},
                   {"skipped_target_missing", run.n_skipped_target_missing},
                   {"skipped_no_source_pair", run.n_skipped_no_source_pair}};
    j["metrics"] = metrics_json(metrics);
    if (drift) {
        const auto d = rec::drift_check(run.results, spec.train_end_ts);
        j["drift"] = ordered_json{{"slope_per_week", d.slope},
                                  {"p_value", d.p_value},
                                  {"n_weeks", d.n_weeks}};
    }
    const std::string text = j.dump(2) + "\n";
    if (!out.empty()) {
        write_text_file(out, text);
        rec::Config cfg;
        emit_provenance(out + ".provenance.json", "evaluate", model.seed, cfg,
                        {{log_path, rec::file_hash_hex(log_path)},
                         {model_path, rec::file_hash_hex(model_path)}},
                        {out});
    }
    if (json || !out.empty()) {
        std::cout << text;
    } else {
        std::printf("%-22s %8s %8s %8s %10s %12s\n", "scorer", "MRR", "HR@1", "HR@5", "n",
                    "med.cands");
        std::printf("%-22s %8.4f %8.4f %8.4f %10zu %12.1f\n",
                    rec::scorer_kind_name(model.kind).c_str(), metrics.mrr, metrics.hr1,
                    metrics.hr5, metrics.n_evaluated, metrics.median_candidates);
        std::printf("skipped: %zu target-missing, %zu no-source-pair\n",
                    run.n_skipped_target_missing, run.n_skipped_no_source_pair);
        if (drift) {
            const auto d = rec::drift_check(run.results, spec.train_end_ts);
            std::printf("drift: slope %+0.5f MRR/week over %d weeks (p = %.3f)\n", d.slope,
                        d.n_weeks, d.p_value);
        }
    }
    return 0;
}

// ---- coverage ----------------------------------------------------------------

int run_coverage(const std::string& log_path, const std::string& model_path,
                 const SplitFlags& split, std::int64_t at_ts, double offset_hours,
                 std::size_t n_authors, int k, std::uint64_t seed, bool json) {
    const auto log = load_log(log_path);
    const auto model = load_model(model_path);
    const auto inits = rec::extract_initiations(log);
    std::int64_t t = at_ts;
    if (t == 0) {
        if (inits.empty()) throw ValidationError("log contains no initiations; pass --at-ts");
        t = split.resolve(inits).train_end_ts +
            static_cast<std::int64_t>(offset_hours * static_cast<double>(rec::kMsPerHour));
    }
    const rec::TextEmbedder embedder(model.embedder);
    const auto report = rec::coverage_eval(model, log, inits, t, embedder, n_authors, k, seed);

    ordered_json j{{"model", model_path},
                   {"scorer", rec::scorer_kind_name(model.kind)},
                   {"at_ts", t}};
    j["coverage"] = coverage_json(report);
    if (json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("%-22s %6s %9s %10s %12s\n", "scorer", "|R|", "%unique", "MMST(wk)",
                    "siloed-ratio");
        std::printf("%-22s %6zu %8.2f%% %10.1f %12.2f\n",
                    rec::scorer_kind_name(model.kind).c_str(), report.r_size,
                    100.0 * report.pct_unique, report.mmst_weeks, report.siloed_ratio);
        std::printf("sampled %zu authors at t=%lld%s\n", report.n_sampled,
                    static_cast<long long>(t), report.sample_short ? " (pool exhausted)" : "");
    }
    return 0;
}

// ---- recommend ---------------------------------------------------------------

struct RecommendArgs {
    std::string log_path;
    std::string model_path;
    std::string participants_path;
    std::string out_dir;
    std::string batch_id = "batch-1";
    std::uint64_t seed = 1;
    int k = 5;
    int cap = 10;
    std::int64_t at_ts = 0;
    std::string blocklist_path;
    std::vector<std::string> previous_manifests;
    std::string site_base_url, feedback_url, faq_url, unsubscribe_url;
    bool json = false;
};

int run_recommend(const RecommendArgs& a) {
    const auto log = load_log(a.log_path);
    const auto model = load_model(a.model_path);
    if (a.out_dir.empty()) throw ValidationError("missing required --out");

    std::vector<int> participants;
    for (const auto& name : read_name_list(a.participants_path, "--participants")) {
        const int u = log.user_index(name);
        if (u < 0) {
            throw ValidationError("--participants: unknown user '" + name + "'");
        }
        participants.push_back(u);
    }
    if (participants.empty()) throw ValidationError("--participants: file lists no users");

    rec::BatchConfig bcfg;
    bcfg.k = a.k;
    bcfg.cap = a.cap;
    bcfg.batch_id = a.batch_id;
    bcfg.seed = a.seed;
    if (!a.site_base_url.empty()) bcfg.site_base_url = a.site_base_url;
    if (!a.feedback_url.empty()) bcfg.feedback_url = a.feedback_url;
    if (!a.faq_url.empty()) bcfg.faq_url = a.faq_url;
    if (!a.unsubscribe_url.empty()) bcfg.unsubscribe_url = a.unsubscribe_url;
    if (!a.blocklist_path.empty()) {
        for (const auto& name : read_name_list(a.blocklist_path, "--blocklist")) {
            const int s = log.site_index(name);
            if (s < 0) throw ValidationError("--blocklist: unknown site '" + name + "'");
            bcfg.blocklist.insert(s);
        }
    }
    std::unordered_set<int> previously;
    for (const auto& path : a.previous_manifests) {
        for (const auto& name : manifest_sites(path, "--previous")) {
            const int s = log.site_index(name);
            if (s < 0) {
                throw ValidationError("--previous: '" + path + "' names unknown site '" + name +
                                      "'");
            }
            previously.insert(s);
        }
    }

    const std::int64_t t = a.at_ts != 0 ? a.at_ts
                           : log.size() ? log.records().back().ts + 1
                                        : 1;
    const auto inits = rec::extract_initiations(log);
    rec::GraphTimeline timeline(log, inits);
    const auto& graph = timeline.advance_to(t);
    const rec::SiteInitiationIndex site_inits(log.n_sites(), inits);
    const rec::TextEmbedder embedder(model.embedder);
    const rec::ScoringContext ctx{log, graph, site_inits, embedder, t};

    const auto batch = rec::run_batch(model, ctx, participants, {}, bcfg, previously);
    rec::write_batch_outputs(a.out_dir, log, batch, bcfg, previously);

    std::size_t short_sets = 0, fresh_sites = 0;
    std::unordered_set<int> unique_sites;
    for (const auto& s : batch.sets) {
        if (s.short_set) ++short_sets;
        for (int site : s.sites) {
            if (unique_sites.insert(site).second && !previously.count(site)) ++fresh_sites;
        }
    }

    std::vector<std::pair<std::string, std::string>> inputs{
        {a.log_path, rec::file_hash_hex(a.log_path)},
        {a.model_path, rec::file_hash_hex(a.model_path)},
        {a.participants_path, rec::file_hash_hex(a.participants_path)}};
    if (!a.blocklist_path.empty()) {
        inputs.emplace_back(a.blocklist_path, rec::file_hash_hex(a.blocklist_path));
    }
    for (const auto& p : a.previous_manifests) inputs.emplace_back(p, rec::file_hash_hex(p));
    rec::Config cfg;
    const fs::path base(a.out_dir);
    emit_provenance((base / "provenance.json").string(), "recommend", a.seed, cfg, inputs,
                    {(base / "manifest.csv").string(), (base / "review.txt").string(),
                     (base / "pseudo_control.csv").string()});

    ordered_json j{{"out", a.out_dir},
                   {"batch_id", a.batch_id},
                   {"participants", participants.size()},
                   {"short_sets", short_sets},
                   {"unique_sites", unique_sites.size()},
                   {"first_time_sites", fresh_sites},
                   {"at_ts", t}};
    if (a.json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "batch " << a.batch_id << ": " << participants.size() << " participants, "
                  << unique_sites.size() << " unique sites (" << fresh_sites
                  << " first-time, listed in review.txt), " << short_sets
                  << " short sets -> " << a.out_dir << "\n";
    }
    return 0;
}

// ---- analyze -----------------------------------------------------------------

int run_effects(const std::string& panel_path, const std::string& method, std::uint64_t seed,
                int n_bootstrap, const std::string& out, bool json) {
    require_readable(panel_path, "--panel");
    rec::OutcomePanel panel;
    try {
        panel = rec::read_panel_csv(panel_path);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("--panel: ") + e.what());
    }

    std::vector<rec::EffectEstimate> estimates;
    auto run_method = [&](rec::EffectMethod m) {
        switch (m) {
            case rec::EffectMethod::raw:
                estimates.push_back(rec::raw_effect(panel, seed, n_bootstrap));
                break;
            case rec::EffectMethod::ols:
                estimates.push_back(rec::ols_effect(panel, seed, n_bootstrap));
                break;
            case rec::EffectMethod::doubly_robust:
                estimates.push_back(rec::doubly_robust_effect(panel, seed, n_bootstrap));
                break;
        }
    };
    if (method == "all") {
        run_method(rec::EffectMethod::raw);
        run_method(rec::EffectMethod::ols);
        run_method(rec::EffectMethod::doubly_robust);
    } else {
        const auto m = rec::effect_method_from_name(method);
        if (!m) throw ValidationError("--method must be raw, ols, doubly_robust, or all");
        run_method(*m);
    }

    ordered_json j{{"panel", panel_path},
                   {"n", panel.n()},
                   {"covariates", panel.covariate_names}};
    j["estimates"] = ordered_json::array();
    for (const auto& e : estimates) j["estimates"].push_back(effect_json(e));
    const std::string text = j.dump(2) + "\n";
    if (!out.empty()) {
        write_text_file(out, text);
        rec::Config cfg;
        emit_provenance(out + ".provenance.json", "analyze effects", seed, cfg,
                        {{panel_path, rec::file_hash_hex(panel_path)}}, {out});
    }
    if (json || !out.empty()) {
        std::cout << text;
    } else {
        std::printf("%-14s %10s %22s %8s %8s\n", "method", "point", "95% CI", "treated",
                    "control");
        for (const auto& e : estimates) {
            char ci[40];
            std::snprintf(ci, sizeof(ci), "[%.4f, %.4f]", e.ci_low, e.ci_high);
            std::printf("%-14s %10.4f %22s %8zu %8zu\n",
                        rec::effect_method_name(e.method).c_str(), e.point, ci, e.n_treated,
                        e.n_control);
        }
    }
    return 0;
}

int run_power(double rho, double alpha, double power, int tails, bool json) {
    rec::PowerRequest req;
    req.effect_size_rho = rho;
    req.alpha = alpha;
    req.power = power;
    req.tails = tails;
    long n = 0;
    try {
        n = rec::required_sample_size(req);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (json) {
        ordered_json j{{"rho", rho}, {"alpha", alpha}, {"power", power}, {"tails", tails},
                       {"n", n}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "n = " << n << " (rho " << rho << ", alpha " << alpha << ", power " << power
                  << ", " << (tails == 1 ? "one" : "two") << "-tailed)\n";
    }
    return 0;
}

int run_groups(const std::string& panel_path, bool json) {
    require_readable(panel_path, "--panel");
    rec::OutcomePanel panel;
    try {
        panel = rec::read_panel_csv(panel_path);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("--panel: ") + e.what());
    }

    std::vector<rec::MetricSamples> metrics(panel.p() + 1);
    for (std::size_t j = 0; j < panel.p(); ++j) metrics[j].name = panel.covariate_names[j];
    metrics.back().name = "outcome";
    for (std::size_t i = 0; i < panel.n(); ++i) {
        for (std::size_t j = 0; j < panel.p(); ++j) {
            (panel.treated[i] ? metrics[j].a : metrics[j].b).push_back(panel.row(i)[j]);
        }
        (panel.treated[i] ? metrics.back().a : metrics.back().b).push_back(panel.outcome[i]);
    }
    rec::GroupDifferenceReport report;
    try {
        report = rec::group_difference_report(metrics);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }

    if (json) {
        ordered_json j{{"panel", panel_path}, {"n_treated", report.n_a},
                       {"n_control", report.n_b}};
        j["metrics"] = ordered_json::array();
        for (const auto& r : report.rows) {
            j["metrics"].push_back(ordered_json{{"metric", r.metric},
                                                {"median_treated", r.median_a},
                                                {"median_control", r.median_b},
                                                {"mean_treated", r.mean_a},
                                                {"mean_control", r.mean_b},
                                                {"sd_treated", r.sd_a},
                                                {"sd_control", r.sd_b},
                                                {"mean_diff", r.mean_diff},
                                                {"welch_p", r.welch_p},
                                                {"cles", r.cles}});
        }
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("treated n=%zu, control n=%zu\n", report.n_a, report.n_b);
        std::printf("%-28s %12s %12s %10s %8s %7s\n", "metric", "mean(T)", "mean(C)", "diff",
                    "p", "CLES");
        for (const auto& r : report.rows) {
            std::printf("%-28s %12.3f %12.3f %+10.3f %8.4f %6.1f%%\n", r.metric.c_str(),
                        r.mean_a, r.mean_b, r.mean_diff, r.welch_p, 100.0 * r.cles);
        }
    }
    return 0;
}

// ---- pipeline ----------------------------------------------------------------

struct PipelineScorerReport {
    std::string name;
    rec::MetricsReport median;
    std::vector<rec::MetricsReport> per_seed;
    std::size_t skipped_target_missing = 0;
    std::size_t skipped_no_source_pair = 0;
    rec::CoverageReport coverage;
};

int run_pipeline(const std::string& config_path, int threads, bool json) {
    require_readable(config_path, "--config");
    rec::Config cfg;
    try {
        cfg = rec::Config::load(config_path);
    } catch (const std::exception& e) {
        throw ValidationError(e.what());
    }
    const std::string out_dir = cfg.get_or("out_dir", "");
    if (out_dir.empty()) throw ValidationError("config must set out_dir");
    fs::create_directories(out_dir);
    const fs::path base(out_dir);
    const std::uint64_t seed = cfg.get_u64_or("seed", 1);

    std::vector<std::pair<std::string, std::string>> inputs{
        {config_path, rec::file_hash_hex(config_path)}};
    std::vector<std::string> outputs;

    // 1. Event log: external when configured, generated otherwise.
    std::string log_path = cfg.get_or("log", "");
    rec::EventLog log;
    if (!log_path.empty()) {
        log = load_log(log_path, "config key 'log'");
        inputs.emplace_back(log_path, rec::file_hash_hex(log_path));
    } else {
        rec::SyntheticConfig synth;
        synth.n_authors = static_cast<int>(cfg.get_int_or("authors", synth.n_authors));
        synth.n_sites = static_cast<int>(cfg.get_int_or("sites", synth.n_sites));
        synth.horizon_days = static_cast<int>(cfg.get_int_or("days", synth.horizon_days));
        synth.n_topics = static_cast<int>(cfg.get_int_or("topics", synth.n_topics));
        synth.homophily = cfg.get_double_or("homophily", synth.homophily);
        synth.popularity_skew = cfg.get_double_or("popularity_skew", synth.popularity_skew);
        synth.coauthor_prob = cfg.get_double_or("coauthor_prob", synth.coauthor_prob);
        synth.rate_journal = cfg.get_double_or("rate_journal", synth.rate_journal);
        synth.rate_reaction = cfg.get_double_or("rate_reaction", synth.rate_reaction);
        synth.rate_comment = cfg.get_double_or("rate_comment", synth.rate_comment);
        synth.rate_guestbook = cfg.get_double_or("rate_guestbook", synth.rate_guestbook);
        synth.rate_visit = cfg.get_double_or("rate_visit", synth.rate_visit);
        synth.rate_follow = cfg.get_double_or("rate_follow", synth.rate_follow);
        synth.start_ts = cfg.get_int_or("start_ts", synth.start_ts);
        synth.seed = seed;
        log = rec::generate_synthetic_log(synth);
        log_path = (base / "log.jsonl").string();
        rec::write_event_log_file(log, log_path);
        outputs.push_back(log_path);
    }

    // 2. Initiations and splits.
    const auto inits = rec::extract_initiations(log);
    if (inits.empty()) throw ValidationError("log contains no initiations");
    SplitFlags split_flags;
    split_flags.train_frac = cfg.get_double_or("train_frac", 0.8);
    split_flags.val_frac = cfg.get_double_or("val_frac", 0.1);
    split_flags.train_end_ts = cfg.get_int_or("train_end_ts", 0);
    split_flags.val_end_ts = cfg.get_int_or("val_end_ts", 0);
    split_flags.test_end_ts = cfg.get_int_or("test_end_ts", 0);
    const auto spec = split_flags.resolve(inits);
    const auto parts = rec::chronological_split(inits, spec);
    if (parts.train.empty()) throw ValidationError("training split is empty");
    if (parts.test.empty()) throw ValidationError("test split is empty");

    const auto fcfg = make_feature_config(static_cast<int>(cfg.get_int_or("text_dim", 64)),
                                          cfg.get_or("features", "tan"));
    const auto espec = make_embedder_spec(cfg.get_or("embedder", "hashing"), fcfg.text_dim,
                                          cfg.get_u64_or("embedder_seed", 7),
                                          cfg.get_or("embedding_table", ""));
    const rec::TextEmbedder embedder(espec);

    // 3. Scorers: the configured primary plus baselines.
    const std::string primary = cfg.get_or("scorer", "mlp");
    std::vector<std::string> scorer_names{primary};
    {
        std::istringstream bs(cfg.get_or("baselines", "people_you_know,random"));
        std::string name;
        while (std::getline(bs, name, ',')) {
            if (!name.empty() && name != primary) scorer_names.push_back(name);
        }
    }

    const int eval_seeds = static_cast<int>(cfg.get_int_or("eval_seeds", 3));
    if (eval_seeds < 1) throw ValidationError("eval_seeds must be at least 1");
    const auto coverage_authors =
        static_cast<std::size_t>(cfg.get_int_or("coverage_authors", 1000));
    const int coverage_k = static_cast<int>(cfg.get_int_or("coverage_k", 5));
    const std::int64_t coverage_t =
        spec.train_end_ts + static_cast<std::int64_t>(
                                cfg.get_double_or("coverage_offset_hours", 12.0) *
                                static_cast<double>(rec::kMsPerHour));

    fs::create_directories(base / "models");
    std::vector<PipelineScorerReport> reports;
    rec::ScorerModel primary_model; // first seed of the primary scorer
    bool have_primary_model = false;

    for (const auto& name : scorer_names) {
        const auto kind = rec::scorer_kind_from_name(name);
        if (!kind) throw ValidationError("config names unknown scorer '" + name + "'");
        const bool trained =
            *kind == rec::ScorerKind::mlp || *kind == rec::ScorerKind::matrix_factorization;
        const int n_seeds = trained ? eval_seeds : 1;

        PipelineScorerReport report;
        report.name = name;
        rec::ScorerModel first_model;
        for (int s = 0; s < n_seeds; ++s) {
            const std::uint64_t model_seed = seed + static_cast<std::uint64_t>(s);
            rec::ScorerModel model;
            if (*kind == rec::ScorerKind::mlp) {
                const auto samples = rec::build_training_samples(log, parts.train, model_seed);
                rec::MlpConfig mcfg;
                mcfg.hidden_units = static_cast<int>(cfg.get_int_or("hidden", 100));
                mcfg.dropout = cfg.get_double_or("dropout", 0.1);
                mcfg.weight_decay = cfg.get_double_or("weight_decay", 0.0);
                mcfg.max_lr = cfg.get_double_or("max_lr", 0.012);
                mcfg.epochs = static_cast<int>(cfg.get_int_or("epochs", 1000));
                mcfg.batch_size = static_cast<int>(cfg.get_int_or("batch_size", 0));
                mcfg.holdout_fraction = cfg.get_double_or("holdout_fraction", 0.01);
                mcfg.seed = model_seed;
                model =
                    rec::train_mlp_model(log, parts.train, samples.samples, embedder, fcfg, mcfg);
            } else if (*kind == rec::ScorerKind::matrix_factorization) {
                const auto samples = rec::build_training_samples(log, parts.train, model_seed);
                rec::MfConfig mfc;
                mfc.dim = static_cast<int>(cfg.get_int_or("mf_dim", 128));
                mfc.weight_decay = cfg.get_double_or("mf_weight_decay", 1e-4);
                mfc.max_lr = cfg.get_double_or("mf_max_lr", 0.012);
                mfc.epochs = static_cast<int>(cfg.get_int_or("mf_epochs", 100));
                mfc.batch_size = static_cast<int>(cfg.get_int_or("mf_batch_size", 1024));
                mfc.min_occurrences = static_cast<int>(cfg.get_int_or("mf_min_occurrences", 2));
                mfc.seed = model_seed;
                model = rec::train_mf_model(log, parts.train, samples.samples, fcfg, espec, mfc);
            } else {
                model = rec::make_baseline(*kind, fcfg, espec, model_seed);
            }

            if (trained) {
                const std::string model_path =
                    (base / "models" / (name + "-seed" + std::to_string(model_seed) + ".rmdl"))
                        .string();
                rec::write_model_file(model_path, model);
                outputs.push_back(model_path);
            }
            if (s == 0) first_model = model;

            const auto run = rec::rank_targets(model, log, inits, parts.test, embedder, threads);
            if (run.results.empty()) {
                throw ValidationError("every test target was skipped for scorer '" + name + "'");
            }
            report.per_seed.push_back(rec::compute_metrics(run.results));
            report.skipped_target_missing = run.n_skipped_target_missing;
            report.skipped_no_source_pair = run.n_skipped_no_source_pair;
        }
        report.median = rec::median_metrics(report.per_seed);
        report.coverage = rec::coverage_eval(first_model, log, inits, coverage_t, embedder,
                                             coverage_authors, coverage_k, seed);
        if (name == primary) {
            primary_model = first_model;
            have_primary_model = true;
        }
        reports.push_back(std::move(report));
    }
    if (!have_primary_model) throw ValidationError("primary scorer produced no model");

    // 4. Recommendation batch at the end of the log.
    const std::int64_t rec_t = log.records().back().ts + 1;
    rec::BatchConfig bcfg;
    bcfg.k = static_cast<int>(cfg.get_int_or("k", 5));
    bcfg.cap = static_cast<int>(cfg.get_int_or("cap", 10));
    bcfg.batch_id = cfg.get_or("batch_id", "batch-1");
    bcfg.seed = seed;
    if (cfg.has("site_base_url")) bcfg.site_base_url = cfg.get("site_base_url");
    if (cfg.has("feedback_url")) bcfg.feedback_url = cfg.get("feedback_url");
    if (cfg.has("faq_url")) bcfg.faq_url = cfg.get("faq_url");
    if (cfg.has("unsubscribe_url")) bcfg.unsubscribe_url = cfg.get("unsubscribe_url");

    std::vector<int> participants;
    const std::string participants_path = cfg.get_or("participants", "");
    if (!participants_path.empty()) {
        inputs.emplace_back(participants_path, rec::file_hash_hex(participants_path));
        for (const auto& name : read_name_list(participants_path, "config key 'participants'")) {
            const int u = log.user_index(name);
            if (u < 0) throw ValidationError("participants file names unknown user '" + name + "'");
            participants.push_back(u);
        }
    } else {
        std::vector<int> pool;
        for (int u = 0; u < log.n_users(); ++u) {
            if (rec::is_active(log, u, rec_t) &&
                !rec::eligible_source_pairs(log, u, rec_t).empty()) {
                pool.push_back(u);
            }
        }
        rec::Rng rng(seed, "participants");
        rng.shuffle(pool);
        const auto want = static_cast<std::size_t>(cfg.get_int_or("batch_participants", 50));
        if (pool.size() > want) pool.resize(want);
        participants = std::move(pool);
    }
    if (participants.empty()) throw ValidationError("no participants available for the batch");

    rec::GraphTimeline timeline(log, inits);
    const auto& graph = timeline.advance_to(rec_t);
    const rec::SiteInitiationIndex site_inits(log.n_sites(), inits);
    const rec::ScoringContext rec_ctx{log, graph, site_inits, embedder, rec_t};
    const auto batch = rec::run_batch(primary_model, rec_ctx, participants, {}, bcfg);
    const std::string batch_dir = (base / bcfg.batch_id).string();
    rec::write_batch_outputs(batch_dir, log, batch, bcfg);
    outputs.push_back((fs::path(batch_dir) / "manifest.csv").string());
    outputs.push_back((fs::path(batch_dir) / "review.txt").string());
    outputs.push_back((fs::path(batch_dir) / "pseudo_control.csv").string());

    // 5. Metrics artifact.
    ordered_json j;
    j["log"] = log_path;
    j["split"] = ordered_json{{"train", parts.train.size()},
                              {"validation", parts.validation.size()},
                              {"test", parts.test.size()},
                              {"dropped", parts.n_dropped},
                              {"train_end_ts", spec.train_end_ts},
                              {"validation_end_ts", spec.validation_end_ts}};
    j["scorers"] = ordered_json::object();
    for (const auto& r : reports) {
        ordered_json s;
        s["evaluation"] = metrics_json(r.median);
        s["per_seed"] = ordered_json::array();
        for (const auto& m : r.per_seed) s["per_seed"].push_back(metrics_json(m));
        s["skipped_target_missing"] = r.skipped_target_missing;
        s["skipped_no_source_pair"] = r.skipped_no_source_pair;
        s["coverage"] = coverage_json(r.coverage);
        j["scorers"][r.name] = std::move(s);
    }
    j["batch"] = ordered_json{{"batch_id", bcfg.batch_id},
                              {"participants", participants.size()},
                              {"directory", batch_dir}};
    const std::string metrics_path = (base / "metrics.json").string();
    write_text_file(metrics_path, j.dump(2) + "\n");
    outputs.push_back(metrics_path);

    emit_provenance((base / "provenance.json").string(), "pipeline", seed, cfg, inputs, outputs);

    if (json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("%-22s %8s %8s %8s %6s %9s %9s %7s\n", "scorer", "MRR", "HR@1", "HR@5", "|R|",
                    "%unique", "MMST(wk)", "siloed");
        for (const auto& r : reports) {
            std::printf("%-22s %8.4f %8.4f %8.4f %6zu %8.2f%% %9.1f %7.2f\n", r.name.c_str(),
                        r.median.mrr, r.median.hr1, r.median.hr5, r.coverage.r_size,
                        100.0 * r.coverage.pct_unique, r.coverage.mmst_weeks,
                        r.coverage.siloed_ratio);
        }
        std::printf("artifacts in %s (metrics.json, models/, %s/)\n", out_dir.c_str(),
                    bcfg.batch_id.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Peer recommendation engine and evaluation harness"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads for parallel-safe stages")
        ->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic event log");
    GenerateArgs gen_args;
    gen->add_option("--out", gen_args.out, "Output event log path (JSON lines)")->required();
    gen->add_option("--config", gen_args.config_path, "Config file with generation keys");
    gen->add_option("--authors", gen_args.synth.n_authors, "Author count");
    gen->add_option("--sites", gen_args.synth.n_sites, "Site count");
    gen->add_option("--days", gen_args.synth.horizon_days, "Horizon in days");
    gen->add_option("--topics", gen_args.synth.n_topics, "Topic count");
    gen->add_option("--homophily", gen_args.synth.homophily, "Homophily strength in [0,1]");
    gen->add_option("--popularity-skew", gen_args.synth.popularity_skew,
                    "Popularity skew exponent (0 = uniform)");
    gen->add_option("--coauthor-prob", gen_args.synth.coauthor_prob,
                    "Chance a site gains a second author");
    gen->add_option("--rate-journal", gen_args.synth.rate_journal, "Journals/author/day");
    gen->add_option("--rate-reaction", gen_args.synth.rate_reaction, "Reactions/author/day");
    gen->add_option("--rate-comment", gen_args.synth.rate_comment, "Comments/author/day");
    gen->add_option("--rate-guestbook", gen_args.synth.rate_guestbook, "Guestbooks/author/day");
    gen->add_option("--rate-visit", gen_args.synth.rate_visit, "Visits/author/day");
    gen->add_option("--rate-follow", gen_args.synth.rate_follow, "Follows/author/day");
    gen->add_option("--seed", gen_args.synth.seed, "Generator seed");
    gen->add_option("--start-ts", gen_args.synth.start_ts, "First-day timestamp (ms)");
    gen->add_flag("--json", gen_args.json, "Machine-readable output");

    // validate
    auto* val = app.add_subcommand("validate", "Parse and summarize an event log");
    std::string val_log;
    bool val_json = false;
    val->add_option("--log", val_log, "Event log path")->required();
    val->add_flag("--json", val_json, "Machine-readable output");

    // extract
    auto* ext = app.add_subcommand("extract", "Extract initiations into a training sample file");
    std::string ext_log, ext_out, ext_split = "train";
    std::uint64_t ext_seed = 1;
    bool ext_json = false;
    SplitFlags ext_splits;
    ext->add_option("--log", ext_log, "Event log path")->required();
    ext->add_option("--out", ext_out, "Output samples file (JSON lines)")->required();
    ext->add_option("--split", ext_split, "train|validation|test|all (default train)");
    ext->add_option("--seed", ext_seed, "Negative-sampling seed");
    ext_splits.add_options(ext);
    ext->add_flag("--json", ext_json, "Machine-readable output");

    // train
    auto* tr = app.add_subcommand("train", "Train a scorer and write a model file");
    TrainArgs tr_args;
    tr->add_option("--log", tr_args.log_path, "Event log path")->required();
    tr->add_option("--model-out", tr_args.model_out, "Output model path")->required();
    tr->add_option("--scorer", tr_args.scorer,
                   "mlp | matrix_factorization | people_you_know | cos_sim | most_inits | "
                   "recent_inits | most_journals | recent_journals | newest_author | "
                   "most_interactive | random");
    tr->add_option("--seed", tr_args.seed, "Training seed");
    tr->add_option("--text-dim", tr_args.text_dim, "Text embedding dimensionality");
    tr->add_option("--features", tr_args.features,
                   "Feature blocks: letters t (text), a (activity), n (network)");
    tr->add_option("--embedder", tr_args.embedder, "hashing | precomputed");
    tr->add_option("--embedding-table", tr_args.embedding_table,
                   "Embedding table path (precomputed embedder)");
    tr->add_option("--embedder-seed", tr_args.embedder_seed, "Hashing embedder seed");
    tr_args.split.add_options(tr);
    tr->add_option("--hidden", tr_args.mlp.hidden_units, "Hidden units per layer");
    tr->add_option("--dropout", tr_args.mlp.dropout, "Dropout probability");
    tr->add_option("--weight-decay", tr_args.mlp.weight_decay, "L2 weight decay");
    tr->add_option("--max-lr", tr_args.mlp.max_lr, "One-cycle peak learning rate");
    tr->add_option("--epochs", tr_args.mlp.epochs, "Training epochs");
    tr->add_option("--batch-size", tr_args.mlp.batch_size, "Minibatch size (0 = full batch)");
    tr->add_option("--holdout-fraction", tr_args.mlp.holdout_fraction,
                   "Grouped hold-out fraction for best-epoch selection");
    tr->add_option("--mf-dim", tr_args.mf.dim, "Factorization dimensionality");
    tr->add_option("--mf-epochs", tr_args.mf.epochs, "Factorization epochs");
    tr->add_option("--mf-max-lr", tr_args.mf.max_lr, "Factorization peak learning rate");
    tr->add_option("--mf-weight-decay", tr_args.mf.weight_decay, "Factorization weight decay");
    tr->add_option("--mf-batch-size", tr_args.mf.batch_size, "Factorization minibatch size");
    tr->add_option("--mf-min-occurrences", tr_args.mf.min_occurrences,
                   "Occurrences below which an id shares the reserved embedding");
    tr->add_flag("--json", tr_args.json, "Machine-readable output");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Rank held-out initiations and report metrics");
    std::string ev_log, ev_model, ev_split = "test", ev_out;
    bool ev_json = false, ev_drift = false;
    SplitFlags ev_splits;
    ev->add_option("--log", ev_log, "Event log path")->required();
    ev->add_option("--model", ev_model, "Model file path")->required();
    ev->add_option("--split", ev_split, "validation|test (default test)");
    ev_splits.add_options(ev);
    ev->add_flag("--drift", ev_drift, "Also fit weekly MRR drift since train end");
    ev->add_option("--out", ev_out, "Write the JSON report to this path");
    ev->add_flag("--json", ev_json, "Machine-readable output");

    // coverage
    auto* cov = app.add_subcommand("coverage", "Recommendation diversity statistics");
    std::string cov_log, cov_model;
    std::int64_t cov_at = 0;
    double cov_offset = 12.0;
    std::size_t cov_n = 1000;
    int cov_k = 5;
    std::uint64_t cov_seed = 1;
    bool cov_json = false;
    SplitFlags cov_splits;
    cov->add_option("--log", cov_log, "Event log path")->required();
    cov->add_option("--model", cov_model, "Model file path")->required();
    cov->add_option("--at-ts", cov_at, "Evaluation instant (ms); default train end + offset");
    cov->add_option("--offset-hours", cov_offset, "Offset past train end when --at-ts unset");
    cov_splits.add_options(cov);
    cov->add_option("--n-authors", cov_n, "Recommendation seekers to sample");
    cov->add_option("--k", cov_k, "Recommendations per seeker");
    cov->add_option("--seed", cov_seed, "Sampling seed");
    cov->add_flag("--json", cov_json, "Machine-readable output");

    // recommend
    auto* rc = app.add_subcommand("recommend", "Build a capped recommendation batch with emails");
    RecommendArgs rc_args;
    rc->add_option("--log", rc_args.log_path, "Event log path")->required();
    rc->add_option("--model", rc_args.model_path, "Model file path")->required();
    rc->add_option("--participants", rc_args.participants_path,
                   "File with one participant user name per line")
        ->required();
    rc->add_option("--out", rc_args.out_dir, "Batch output directory")->required();
    rc->add_option("--batch-id", rc_args.batch_id, "Batch identifier");
    rc->add_option("--seed", rc_args.seed, "Draft-order seed");
    rc->add_option("--k", rc_args.k, "Recommendations per participant");
    rc->add_option("--cap", rc_args.cap, "Max assignments per site in this batch");
    rc->add_option("--at-ts", rc_args.at_ts, "Scoring instant (ms); default just past the log");
    rc->add_option("--blocklist", rc_args.blocklist_path,
                   "File with one excluded site name per line");
    rc->add_option("--previous", rc_args.previous_manifests,
                   "manifest.csv of an earlier batch (repeatable)");
    rc->add_option("--site-base-url", rc_args.site_base_url, "Base URL for site links");
    rc->add_option("--feedback-url", rc_args.feedback_url, "Footer feedback link");
    rc->add_option("--faq-url", rc_args.faq_url, "Footer FAQ link");
    rc->add_option("--unsubscribe-url", rc_args.unsubscribe_url, "Footer unsubscribe link");
    rc->add_flag("--json", rc_args.json, "Machine-readable output");

    // analyze
    auto* an = app.add_subcommand("analyze", "Effect, group, and power analyses");
    an->require_subcommand(1);
    auto* an_eff = an->add_subcommand("effects", "Treatment-effect estimates from a panel CSV");
    std::string eff_panel, eff_method = "all", eff_out;
    std::uint64_t eff_seed = 1;
    int eff_boot = 1000;
    bool eff_json = false;
    an_eff->add_option("--panel", eff_panel, "Outcome panel CSV")->required();
    an_eff->add_option("--method", eff_method, "raw|ols|doubly_robust|all (default all)");
    an_eff->add_option("--seed", eff_seed, "Bootstrap seed");
    an_eff->add_option("--bootstrap", eff_boot, "Bootstrap iterations");
    an_eff->add_option("--out", eff_out, "Write the JSON report to this path");
    an_eff->add_flag("--json", eff_json, "Machine-readable output");

    auto* an_pow = an->add_subcommand("power", "Required sample size for a target effect");
    double pw_rho = 0.0, pw_alpha = 0.05, pw_power = 0.8;
    int pw_tails = 1;
    bool pw_json = false;
    an_pow->add_option("--rho", pw_rho, "Point-biserial effect size in (0,1)")->required();
    an_pow->add_option("--alpha", pw_alpha, "Significance level");
    an_pow->add_option("--power", pw_power, "Target power");
    an_pow->add_option("--tails", pw_tails, "1 or 2");
    an_pow->add_flag("--json", pw_json, "Machine-readable output");

    auto* an_grp = an->add_subcommand("groups", "Treated/control group differences per column");
    std::string grp_panel;
    bool grp_json = false;
    an_grp->add_option("--panel", grp_panel, "Outcome panel CSV")->required();
    an_grp->add_flag("--json", grp_json, "Machine-readable output");

    // power (alias for analyze power)
    auto* pw = app.add_subcommand("power", "Required sample size for a target effect");
    double pw2_rho = 0.0, pw2_alpha = 0.05, pw2_power = 0.8;
    int pw2_tails = 1;
    bool pw2_json = false;
    pw->add_option("--rho", pw2_rho, "Point-biserial effect size in (0,1)")->required();
    pw->add_option("--alpha", pw2_alpha, "Significance level");
    pw->add_option("--power", pw2_power, "Target power");
    pw->add_option("--tails", pw2_tails, "1 or 2");
    pw->add_flag("--json", pw2_json, "Machine-readable output");

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Generate/load, train, evaluate, and batch");
    std::string pl_config;
    bool pl_json = false;
    pl->add_option("--config", pl_config, "Pipeline configuration file")->required();
    pl->add_flag("--json", pl_json, "Machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) {
            rec::Config cfg;
            if (!gen_args.config_path.empty()) {
                try {
                    cfg = rec::Config::load(gen_args.config_path);
                } catch (const std::exception& e) {
                    throw ValidationError(e.what());
                }
            }
            merge_generate_config(gen_args, gen, cfg);
            return run_generate(gen_args, cfg);
        }
        if (*val) return run_validate(val_log, val_json);
        if (*ext) return run_extract(ext_log, ext_out, ext_splits, ext_split, ext_seed, ext_json);
        if (*tr) return run_train(tr_args);
        if (*ev)
            return run_evaluate(ev_log, ev_model, ev_splits, ev_split, threads, ev_drift, ev_out,
                                ev_json);
        if (*cov)
            return run_coverage(cov_log, cov_model, cov_splits, cov_at, cov_offset, cov_n, cov_k,
                                cov_seed, cov_json);
        if (*rc) return run_recommend(rc_args);
        if (*an) {
            if (*an_eff) return run_effects(eff_panel, eff_method, eff_seed, eff_boot, eff_out,
                                            eff_json);
            if (*an_pow) return run_power(pw_rho, pw_alpha, pw_power, pw_tails, pw_json);
            if (*an_grp) return run_groups(grp_panel, grp_json);
        }
        if (*pw) return run_power(pw2_rho, pw2_alpha, pw2_power, pw2_tails, pw2_json);
        if (*pl) return run_pipeline(pl_config, threads, pl_json);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
