#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recengine/event_log.hpp"
#include "recengine/features.hpp"
#include "recengine/feedback.hpp"
#include "recengine/models.hpp"

namespace rec {

// Boundaries between the chronological splits. An initiation lands in train
// when ts < train_end_ts, in validation when train_end_ts <= ts <
// validation_end_ts, in test when validation_end_ts <= ts < test_end_ts,
// and is dropped otherwise.
struct SplitSpec {
    std::int64_t train_end_ts = 0;
    std::int64_t validation_end_ts = 0;
    std::int64_t test_end_ts = 0;
};

// Throws unless the boundaries strictly increase.
void validate_split(const SplitSpec& spec);

// Boundaries placed so roughly the given fractions of the initiations fall
// into train and validation, the rest into test.
SplitSpec split_from_fractions(const std::vector<Initiation>& initiations, double train_frac,
                               double validation_frac);

struct ChronologicalSplit {
    std::vector<Initiation> train;
    std::vector<Initiation> validation;
    std::vector<Initiation> test;
    std::size_t n_dropped = 0;
};

ChronologicalSplit chronological_split(const std::vector<Initiation>& initiations,
                                       const SplitSpec& spec);

struct RankResult {
    int initiation_index = -1; // position in the targets list
    std::int64_t ts = 0;
    int rank = 0;         // competition rank: #{candidate sites scoring >= target}
    int n_candidates = 0; // candidate sites at the instant of the initiation
};

struct RankRun {
    std::vector<RankResult> results;
    std::size_t n_skipped_target_missing = 0; // target absent from the candidate set
    std::size_t n_skipped_no_source_pair = 0; // source had no eligible authored pair
};

// Ranks each target initiation's true site among the source's candidate
// sites at that instant: score every candidate pair, merge to site level,
// then competition-rank (tied sites share the worst applicable rank, so two
// tied leaders both rank 2). `history` must be the full initiation stream of
// the log — earlier targets affect the graph seen by later ones. Targets
// must be sorted by ts. Results are identical for any thread count: workers
// take contiguous target ranges with their own graph replay and embedding
// cache.
RankRun rank_targets(const ScorerModel& model, const EventLog& log,
                     const std::vector<Initiation>& history,
                     const std::vector<Initiation>& targets, const TextEmbedder& embedder,
                     int n_threads = 1);

struct MetricsReport {
    double mrr = 0.0;
    double hr1 = 0.0;
    double hr5 = 0.0;
    std::size_t n_evaluated = 0;
    double median_candidates = 0.0;
};

// Throws on an empty result list.
MetricsReport compute_metrics(const std::vector<RankResult>& results);

// Field-wise median across seeds (n_evaluated uses the smallest run).
MetricsReport median_metrics(const std::vector<MetricsReport>& per_seed);

struct CoverageReport {
    std::size_t n_sampled = 0; // recommendation seekers actually sampled
    int k = 0;
    bool sample_short = false;   // fewer eligible active authors than requested
    std::size_t r_size = 0;      // unique sites recommended
    double pct_unique = 0.0;     // r_size / (n_sampled * k)
    double mmst_weeks = 0.0;     // mean over seekers of min site tenure in their set
    double siloed_pct_recced = 0.0;   // siloed share of recommended sites
    double siloed_pct_unrecced = 0.0; // siloed share of recommendable-but-not-recommended sites
    double siloed_ratio = 0.0;        // recced share / unrecced share
};

// Samples up to n_authors eligible, active authors at t (keyed shuffle of
// the author pool), gives each their uncapped top-k sites, and reports the
// diversity statistics. A site is siloed when every author it had at t has
// received zero initiations strictly before t.
CoverageReport coverage_eval(const ScorerModel& model, const EventLog& log,
                             const std::vector<Initiation>& history, std::int64_t t,
                             const TextEmbedder& embedder, std::size_t n_authors, int k,
                             std::uint64_t seed);

struct DriftReport {
    double slope = 0.0; // change in weekly MRR per week since training ended
    double p_value = 1.0;
    int n_weeks = 0;
    std::vector<int> weeks;        // week offsets with at least one result
    std::vector<double> weekly_mrr;
    std::vector<std::size_t> weekly_n;
};

// Buckets ranked results by whole weeks since train_end_ts and fits weekly
// MRR against the week offset. Throws with fewer than three nonempty weeks.
DriftReport drift_check(const std::vector<RankResult>& results, std::int64_t train_end_ts);

} // namespace rec
