#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recengine/event_log.hpp"
#include "recengine/feedback.hpp"
#include "recengine/models.hpp"

namespace rec {

struct BatchConfig {
    int k = 5;    // recommendations per participant; also the number of draft rounds
    int cap = 10; // max assignments of one site within a batch
    std::string batch_id = "batch-1";
    std::uint64_t seed = 1;
    std::unordered_set<int> blocklist; // site indices excluded by manual review
    std::string site_base_url = "https://sites.example.org";
    std::string feedback_url = "https://sites.example.org/feedback";
    std::string faq_url = "https://sites.example.org/faq";
    std::string unsubscribe_url = "https://sites.example.org/unsubscribe";
};

struct SiteScore {
    int site = -1;
    double score = 0.0;
};

// Collapses a (source pair x candidate pair) score matrix to one score per
// candidate site: mean over the source's pairs, then the maximum over each
// site's author pairs, sorted descending with a keyed-hash tie-break so equal
// scores order deterministically but without positional bias.
std::vector<SiteScore> merge_pair_scores_to_sites(const EventLog& log,
                                                  const std::vector<PairRef>& candidates,
                                                  const std::vector<double>& pair_scores,
                                                  std::size_t n_source_pairs, std::uint64_t seed);

// Scores every candidate pair of `user` at ctx.t and merges to site level.
// Empty when the user has no eligible authored pair to represent them or no
// candidates exist.
std::vector<SiteScore> rank_sites_for_user(const ScorerModel& model, const ScoringContext& ctx,
                                           int user);

struct ParticipantRanking {
    int user = -1;
    std::vector<SiteScore> sites; // merged site scores, descending
};

struct RecommendationSet {
    int participant = -1;
    std::vector<int> sites;       // in model-rank order, best first
    std::vector<double> scores;   // merged score per site
    std::vector<int> model_ranks; // 1-based position in the participant's ranking
    bool short_set = false;       // ranking exhausted before k picks
};

// Capped draft: k rounds, each visiting participants in a fresh keyed
// shuffle; on their turn a participant takes their highest-ranked site that
// is not blocklisted, not already theirs, and assigned fewer than cap times
// in this batch. Sets come back sorted by model rank. A participant whose
// ranking runs out is flagged short rather than failing the batch.
std::vector<RecommendationSet> draft_assign(const std::vector<ParticipantRanking>& rankings,
                                            const BatchConfig& cfg);

struct SiteMetadata {
    std::string title;
    std::string latest_update; // source text for the preview; may be empty
};

// Title = site name, preview = text of the latest journal update strictly
// before t (empty when the update carries no text).
std::unordered_map<int, SiteMetadata> derive_site_metadata(const EventLog& log,
                                                           const std::vector<int>& sites,
                                                           std::int64_t t);

struct EmailDocument {
    int participant = -1;
    std::string subject;
    std::string html;
    std::string text;
    std::vector<std::string> links; // one tracked journal link per bullet, in order
};

// First `limit` characters of the update, cut back to a word boundary, with
// an ellipsis when anything was dropped.
std::string preview_text(const std::string& update_text, std::size_t limit = 500);

// Journal link carrying the tracking parameters: utm_source=rec-engine,
// utm_medium=email, utm_campaign=<batch>, utm_term=<participant>,
// utm_content=<site>; values percent-encoded.
std::string utm_link(const std::string& base_url, const std::string& site_name,
                     const std::string& batch_id, const std::string& participant_name);

// HTML body plus a plain-text alternative: one bullet per recommendation
// (title, tracked journal link, preview) and a footer with the feedback,
// FAQ, and unsubscribe links. Throws when a recommended site is missing from
// the metadata map, naming the site.
EmailDocument render_email(const EventLog& log, const RecommendationSet& set,
                           const std::unordered_map<int, SiteMetadata>& metadata,
                           const BatchConfig& cfg);

struct PseudoControlSet {
    int participant = -1;
    std::vector<int> sites;
    bool short_set = false;
};

// Per participant: the top k of their ranking after removing every site that
// was actually recommended to anyone in any batch. Disjointness from the
// recommended set is guaranteed by construction.
std::vector<PseudoControlSet> build_pseudo_control_sets(
    const std::vector<ParticipantRanking>& rankings,
    const std::unordered_set<int>& recommended_anywhere, int k);

struct BatchResult {
    std::vector<ParticipantRanking> rankings;
    std::vector<RecommendationSet> sets;
    std::vector<PseudoControlSet> pseudo_controls;
    std::vector<EmailDocument> emails;
};

// Rank, draft, build pseudo-controls against (previously_recommended + this
// batch's picks), and render one email per participant.
// `previously_recommended` holds site indices assigned in earlier batches.
BatchResult run_batch(const ScorerModel& model, const ScoringContext& ctx,
                      const std::vector<int>& participants,
                      const std::unordered_map<int, SiteMetadata>& metadata,
                      const BatchConfig& cfg,
                      const std::unordered_set<int>& previously_recommended = {});

// Batch directory artifacts. The manifest has one row per (participant,
// slot); the review file lists sites recommended for the first time across
// the study, for manual moderation before sending.
void write_manifest_csv(const std::string& path, const EventLog& log,
                        const std::vector<RecommendationSet>& sets, const std::string& batch_id);
void write_review_file(const std::string& path, const EventLog& log,
                       const std::vector<RecommendationSet>& sets,
                       const std::unordered_set<int>& previously_recommended);
void write_pseudo_control_csv(const std::string& path, const EventLog& log,
                              const std::vector<PseudoControlSet>& sets,
                              const std::string& batch_id);

// Writes emails (<participant>.html / <participant>.txt), manifest.csv,
// review.txt, and pseudo_control.csv under `dir`, creating it if needed.
void write_batch_outputs(const std::string& dir, const EventLog& log, const BatchResult& batch,
                         const BatchConfig& cfg,
                         const std::unordered_set<int>& previously_recommended = {});

} // namespace rec
