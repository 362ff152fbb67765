#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "recengine/event_log.hpp"
#include "recengine/features.hpp"
#include "recengine/feedback.hpp"
#include "recengine/mlp.hpp"

namespace rec {

enum class ScorerKind : int {
    mlp = 0,
    people_you_know,
    cos_sim,
    matrix_factorization,
    most_inits,
    recent_inits,
    most_journals,
    recent_journals,
    newest_author,
    most_interactive,
    random_scorer,
};

const std::string& scorer_kind_name(ScorerKind k);
std::optional<ScorerKind> scorer_kind_from_name(const std::string& name);

struct MfConfig {
    int dim = 128;
    double weight_decay = 1e-4;
    double max_lr = 0.012;
    int epochs = 100;
    int batch_size = 1024;
    int min_occurrences = 2; // rarer ids collapse to the reserved embedding
    std::uint64_t seed = 1;
};

// Dot-product factorization over (source author, candidate site) ids. Row 0
// of each table is the reserved embedding shared by ids seen fewer than
// min_occurrences times in the training initiations (and by ids never seen).
struct MfParams {
    int dim = 0;
    std::vector<std::string> author_ids; // row i+1 belongs to author_ids[i]
    std::vector<std::string> site_ids;
    std::vector<double> author_emb; // (author_ids.size()+1) x dim
    std::vector<double> site_emb;   // (site_ids.size()+1) x dim

    int author_row(const std::string& name) const;
    int site_row(const std::string& name) const;

private:
    // Lazily built lookup indexes; scoring loops hit these per candidate.
    mutable std::unordered_map<std::string, int> author_lookup_;
    mutable std::unordered_map<std::string, int> site_lookup_;
};

struct TrainingMeta {
    std::uint64_t seed = 0;
    int best_epoch = -1;
    int epochs = 0;
    double best_holdout_loss = 0.0;
    std::size_t n_train_rows = 0;
    std::size_t n_holdout_rows = 0;
};

// A scoring model of any kind, plus everything needed to score: the feature
// layout, the embedder recipe, standardization statistics (trained kinds),
// and learned weights where applicable.
struct ScorerModel {
    ScorerKind kind = ScorerKind::random_scorer;
    FeatureConfig features;
    EmbedderSpec embedder;
    std::uint64_t seed = 0; // drives the random scorer and tie-break hashing
    Standardizer stats;     // mlp
    MlpParams mlp_params;   // mlp
    MlpConfig mlp_cfg;      // mlp (recorded for provenance)
    MfParams mf_params;     // matrix_factorization
    MfConfig mf_cfg;
    TrainingMeta meta;
};

// Everything a scorer may consult about the world at instant t. The graph
// must already be advanced to t; the initiation index holds full history and
// is always queried with windows ending at t.
struct ScoringContext {
    const EventLog& log;
    const InteractionGraph& graph;
    const SiteInitiationIndex& site_inits;
    const TextEmbedder& embedder;
    std::int64_t t;
};

// Higher is better. Deterministic for a fixed model, pair, and context.
double score_pair(const ScorerModel& model, PairRef source, PairRef candidate,
                  const ScoringContext& ctx);

// Assembled (unstandardized) rows for a sample list, advancing an internal
// graph cursor over the full initiation history. Samples must be in
// nondecreasing ts order.
struct FeatureMatrix {
    std::vector<double> rows;
    std::size_t n = 0;
    int dim = 0;
    std::vector<int> labels;
    std::vector<int> groups; // initiation index per row
};
FeatureMatrix build_feature_matrix(const EventLog& log, const std::vector<Initiation>& initiations,
                                   const std::vector<TrainingSample>& samples,
                                   const TextEmbedder& embedder, const FeatureConfig& fcfg);

// Fits the standardizer on the sample rows, trains, and packages the result.
ScorerModel train_mlp_model(const EventLog& log, const std::vector<Initiation>& initiations,
                            const std::vector<TrainingSample>& samples,
                            const TextEmbedder& embedder, const FeatureConfig& fcfg,
                            const MlpConfig& cfg, TrainingTrace* trace_out = nullptr);

ScorerModel train_mf_model(const EventLog& log, const std::vector<Initiation>& initiations,
                           const std::vector<TrainingSample>& samples, const FeatureConfig& fcfg,
                           const EmbedderSpec& espec, const MfConfig& cfg);

// An untrained scorer (baselines and the random scorer).
ScorerModel make_baseline(ScorerKind kind, const FeatureConfig& fcfg, const EmbedderSpec& espec,
                          std::uint64_t seed);

struct HyperGrid {
    std::vector<int> hidden_units{100, 300, 500};
    std::vector<double> dropout{0.1, 0.5, 0.9};
    std::vector<double> weight_decay{0.0, 1e-4, 1e-2};
    std::vector<double> max_lr{0.008, 0.016};
};

struct HyperTrial {
    MlpConfig cfg;
    std::vector<double> seed_scores; // validation MRR per seed
    double median_score = 0.0;
};

struct HyperResult {
    MlpConfig best;
    double best_median = 0.0;
    std::vector<HyperTrial> trials;
};

// Exhaustive grid search; each configuration is scored by the caller-supplied
// function (train + validation MRR) once per seed and configurations are
// ranked by median score. Exact ties prefer fewer hidden units, then lower
// dropout.
HyperResult hyperparameter_search(const HyperGrid& grid, const MlpConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::function<double(const MlpConfig&)>& evaluate);

} // namespace rec
