#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "recengine/event_log.hpp"
#include "recengine/feedback.hpp"

namespace rec {

// Hours reported for "time since last X" when no X has ever happened.
constexpr double kMissingRecencyHours = 10000.0;

// Feature vector layout, per pair and overall:
//   [ src_text(d) | src_activity(9) | src_network(3) |
//     cand_text(d) | cand_activity(9) | cand_network(3) | dyadic(3) ]
// Ablation flags zero out blocks without changing positions or length, so a
// model trained on one mask stays shape-compatible with another.
struct FeatureConfig {
    int text_dim = 768;
    bool use_text = true;
    bool use_activity = true;
    bool use_network = true; // also controls the dyadic block

    int pair_block_length() const { return text_dim + 12; }
    int feature_length() const { return 2 * (text_dim + 12) + 3; }
    int src_text_off() const { return 0; }
    int src_activity_off() const { return text_dim; }
    int src_network_off() const { return text_dim + 9; }
    int cand_text_off() const { return text_dim + 12; }
    int cand_activity_off() const { return 2 * text_dim + 12; }
    int cand_network_off() const { return 2 * text_dim + 21; }
    int dyadic_off() const { return 2 * text_dim + 24; }
    bool is_text_dim(int i) const {
        return i < text_dim || (i >= cand_text_off() && i < cand_text_off() + text_dim);
    }
};

// Activity block, 9 values: for each of journal_update, reaction, comment,
// guestbook the count in the trailing open week (t-1w, t) and the hours since
// the author's most recent one anywhere; then the author's tenure in hours
// since their first journal update.
std::array<double, 9> activity_features(const EventLog& log, int author, std::int64_t t);

// Network block: indegree, outdegree, and weakly-connected component size of
// the author in the supplied initiation graph.
std::array<double, 3> network_features(const InteractionGraph& g, int author);

struct EmbedderSpec {
    enum class Kind { hashing, precomputed };
    Kind kind = Kind::hashing;
    int dim = 768;
    std::uint64_t seed = 0; // hashing only
    int min_ngram = 1;      // hashing only
    int max_ngram = 2;
    std::string table_path; // precomputed only
};

// Per-update text vectors. The hashing kind folds word n-grams into `dim`
// signed buckets and L2-normalizes; the precomputed kind looks rows up by
// content_ref in a table loaded from disk, at whatever scale the table
// supplies. Site embeddings mean-pool the up to three most recent updates
// before t; the mean is not re-normalized.
class TextEmbedder {
public:
    explicit TextEmbedder(EmbedderSpec spec);

    const EmbedderSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }

    std::vector<double> embed_text(const std::string& text) const;
    const std::vector<double>& embed_site(const EventLog& log, int site, std::int64_t t) const;

private:
    std::vector<double> embed_update(const EventLog& log, std::size_t record) const;
    void load_table(const std::string& path);

    EmbedderSpec spec_;
    std::unordered_map<std::string, std::vector<float>> table_;
    mutable std::unordered_map<std::uint64_t, std::vector<double>> site_cache_;
};

// Binary embedding table: magic, dim, row count, then (id, float32 row)
// pairs, little-endian. Paths ending in .jsonl are read and written as JSON
// lines {"id": ..., "vec": [...]} instead, for hand-written fixtures.
void write_embedding_table(const std::string& path,
                           const std::vector<std::pair<std::string, std::vector<float>>>& rows);
std::unordered_map<std::string, std::vector<float>> read_embedding_table(const std::string& path,
                                                                         int expected_dim = -1);

// Writes feature_length() doubles describing (source, candidate) at t.
void assemble_features(const EventLog& log, const InteractionGraph& g, const TextEmbedder& emb,
                       const FeatureConfig& cfg, PairRef source, PairRef candidate,
                       std::int64_t t, double* out);
std::vector<double> assemble_feature_vec(const EventLog& log, const InteractionGraph& g,
                                         const TextEmbedder& emb, const FeatureConfig& cfg,
                                         PairRef source, PairRef candidate, std::int64_t t);

// The [text | activity | network] block for one pair; used by both halves of
// the full vector and by the cosine-similarity scorer.
void pair_feature_block(const EventLog& log, const InteractionGraph& g, const TextEmbedder& emb,
                        const FeatureConfig& cfg, PairRef pair, std::int64_t t, double* out);

// Per-dimension affine transform fit on training rows. Text dimensions pass
// through untouched; near-constant dimensions get unit scale so they map to
// zero rather than exploding.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stdev;

    bool empty() const { return mean.empty(); }
    void apply(double* x) const;
    std::vector<double> applied(std::vector<double> x) const;
};

Standardizer fit_standardizer(const std::vector<double>& rows, std::size_t n_rows,
                              const FeatureConfig& cfg);

} // namespace rec
