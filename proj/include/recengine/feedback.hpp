#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "recengine/event_log.hpp"

namespace rec {

// An author/site pair by interned index. The same author may appear in many
// pairs (one per site they publish on) and a multi-author site contributes
// one pair per author.
struct PairRef {
    int author = -1;
    int site = -1;
    bool operator==(const PairRef&) const = default;
};

// The first interaction (reaction, comment, or guestbook) by a user on a
// site they do not author, taken at a moment when they are already an author
// somewhere. At most one exists per (source, target_site): only the very
// first interaction with the site can qualify, so a pair whose first contact
// happened before the user became an author never yields one.
struct Initiation {
    int source = -1;
    int target_site = -1;
    std::int64_t ts = 0;
    std::size_t record = 0; // index into log.records()
};

std::vector<Initiation> extract_initiations(const EventLog& log);

// A pair can be ranked once the author has published at least three journal
// updates on that site strictly before t.
bool is_eligible(const EventLog& log, int author, int site, std::int64_t t);

// An author is active at t if they published or interacted anywhere in the
// open window (t - 1 week, t). Visits and follows do not count.
bool is_active(const EventLog& log, int author, std::int64_t t);

// Pairs the engine may recommend to `source` at t: eligible, active, not
// authored by the source, and belonging to a site the source has never
// interacted with. Order is deterministic (first-update order of the pair).
std::vector<PairRef> candidate_pairs(const EventLog& log, int source, std::int64_t t);

// The (user, authored site) pairs that can represent `user` as a
// recommendation seeker at t: those eligible at t, in the order the user
// first updated each site.
std::vector<PairRef> eligible_source_pairs(const EventLog& log, int user, std::int64_t t);

// Directed multigraph over authors; an edge a->b is added for every author b
// of a site that a initiated with. Connectivity queries treat edges as
// undirected. Grows monotonically as initiations are applied in time order.
class InteractionGraph {
public:
    explicit InteractionGraph(int n_users);

    void add_edge(int from, int to);
    // Adds edges from the initiation's source to every author the target
    // site had at the initiation instant.
    void add_initiation(const EventLog& log, const Initiation& init);

    int n_users() const { return static_cast<int>(indeg_.size()); }
    int n_edges() const { return n_edges_; }
    int indegree(int u) const { return indeg_[static_cast<std::size_t>(u)]; }
    int outdegree(int u) const { return outdeg_[static_cast<std::size_t>(u)]; }
    int component_size(int u) const;
    bool same_component(int a, int b) const;
    bool has_edge(int from, int to) const;
    // True when some third author links a and b (undirected two-hop path).
    bool friend_of_friend(int a, int b) const;
    const std::unordered_set<int>& neighbors(int u) const {
        return adj_[static_cast<std::size_t>(u)];
    }

private:
    int find(int x) const;

    mutable std::vector<int> parent_;
    std::vector<int> comp_size_;
    std::vector<int> indeg_;
    std::vector<int> outdeg_;
    std::vector<std::unordered_set<int>> adj_; // undirected, deduplicated
    std::vector<std::unordered_set<int>> out_; // directed, deduplicated
    int n_edges_ = 0;
};

struct DyadicFeatures {
    double weakly_connected = 0.0;
    double friend_of_friend = 0.0;
    double prior_reciprocal = 0.0; // candidate author previously initiated with the source
};

DyadicFeatures dyadic_features(const InteractionGraph& g, int source_author, int candidate_author);

// Forward-only cursor that replays initiations into a graph. advance_to(t)
// applies every initiation with ts strictly before t; t must not decrease.
class GraphTimeline {
public:
    GraphTimeline(const EventLog& log, std::vector<Initiation> initiations);

    const InteractionGraph& advance_to(std::int64_t t);
    const InteractionGraph& graph() const { return graph_; }
    const std::vector<Initiation>& initiations() const { return initiations_; }

private:
    const EventLog* log_;
    std::vector<Initiation> initiations_;
    InteractionGraph graph_;
    std::size_t cursor_ = 0;
    std::int64_t last_t_ = std::numeric_limits<std::int64_t>::min();
};

// Per-site initiation history, for popularity-style scorers and silo checks.
class SiteInitiationIndex {
public:
    SiteInitiationIndex(int n_sites, const std::vector<Initiation>& initiations);

    int count_window(int site, std::int64_t lo, std::int64_t hi) const; // open interval
    std::int64_t last_before(int site, std::int64_t t) const;           // kNever if none

private:
    std::vector<std::vector<std::int64_t>> by_site_;
};

struct TrainingSample {
    PairRef source;
    PairRef candidate;
    int label = 0;      // 1 = observed initiation, 0 = sampled negative
    std::int64_t ts = 0; // feature capture instant (the initiation's timestamp)
    int initiation_index = -1;
};

struct TrainingSampleSet {
    std::vector<TrainingSample> samples;
    std::uint64_t seed = 0;
    int n_initiations = 0;             // initiations inspected
    int n_skipped_no_source_pair = 0;  // initiator had no eligible pair
    int n_skipped_no_target_pair = 0;  // target site had no eligible pair
    int n_without_negative = 0;        // positives emitted with no candidate to pair
};

// One positive per (eligible source pair) x (eligible target pair) of each
// initiation, captured at the initiation instant, plus one uniformly sampled
// negative from the source's candidates per positive. The negative draw is
// keyed by (seed, initiation index) so output does not depend on traversal
// parallelism or ordering.
TrainingSampleSet build_training_samples(const EventLog& log,
                                         const std::vector<Initiation>& initiations,
                                         std::uint64_t seed);

// JSON-lines sidecar: a header line recording the seed, source log hash, and
// extraction counters, then one line per sample.
void write_training_samples_file(const TrainingSampleSet& set, const EventLog& log,
                                 const std::string& path, const std::string& log_hash);
TrainingSampleSet read_training_samples_file(const std::string& path, const EventLog& log,
                                             std::string* log_hash_out = nullptr);

} // namespace rec
