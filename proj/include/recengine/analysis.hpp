#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recengine/event_log.hpp"

namespace rec {

// Unit-level table for effect estimation: one row per unit with a binary
// treatment flag, named real covariates, and one real outcome. No missing
// values ever — gappy rows are rejected at load time.
struct OutcomePanel {
    std::vector<std::string> covariate_names;
    std::vector<std::string> unit_ids;
    std::vector<int> treated;       // 0/1 per row
    std::vector<double> covariates; // row-major, n() x p()
    std::vector<double> outcome;
    int pre_weeks = 5;
    int post_weeks = 13;

    std::size_t n() const { return treated.size(); }
    std::size_t p() const { return covariate_names.size(); }
    const double* row(std::size_t i) const { return covariates.data() + i * p(); }
};

// CSV with header "unit,treated,<covariate names...>,outcome". Loading
// rejects malformed or gappy rows with the line number and column name.
OutcomePanel read_panel_csv(const std::string& path);
void write_panel_csv(const OutcomePanel& panel, const std::string& path);

enum class EffectMethod { raw, ols, doubly_robust };
const std::string& effect_method_name(EffectMethod m);
std::optional<EffectMethod> effect_method_from_name(const std::string& name);

struct EffectEstimate {
    EffectMethod method = EffectMethod::raw;
    double point = 0.0;
    double ci_low = 0.0;  // 95% percentile bootstrap
    double ci_high = 0.0;
    std::size_t n_treated = 0;
    std::size_t n_control = 0;
    int n_bootstrap = 1000;
    std::uint64_t seed = 0;
};

// Raw difference of group means E[Y|T=1] - E[Y|T=0]. The bootstrap (here
// and below) resamples rows with replacement, stratified by treatment, with
// one RNG stream per iteration keyed by (seed, iteration).
EffectEstimate raw_effect(const OutcomePanel& panel, std::uint64_t seed, int n_bootstrap = 1000);

// Coefficient on T in the least-squares fit of Y on [1, T, covariates].
// Throws on a rank-deficient design, naming the collinear columns.
EffectEstimate ols_effect(const OutcomePanel& panel, std::uint64_t seed, int n_bootstrap = 1000);

// Doubly robust estimate: logistic propensity e(A) fit by iteratively
// reweighted least squares (clipped into [0.01, 0.99]), per-arm outcome
// regressions m1(A), m0(A) by least squares, then
//   mean[ T(Y - m1)/e + m1 ] - mean[ (1-T)(Y - m0)/(1-e) + m0 ].
// The bootstrap re-runs all three fits per resample.
EffectEstimate doubly_robust_effect(const OutcomePanel& panel, std::uint64_t seed,
                                    int n_bootstrap = 1000);

struct LogisticFit {
    std::vector<double> coef; // intercept first
    int iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
};

// Logistic regression by IRLS on the design [1, X]. Fitted probabilities are
// clipped into [0.01, 0.99] at every step, which also bounds the IRLS
// weights, so separable data plateaus and converges by deviance instead of
// diverging. Non-convergence within max_iter throws, reporting the final
// gradient norm, unless error_on_failure is false (the bootstrap path).
LogisticFit logistic_irls(const std::vector<double>& x, std::size_t n, std::size_t p,
                          const std::vector<int>& y, int max_iter = 100,
                          bool error_on_failure = true);

// Clipped propensity scores from the panel's covariates (exposed for tests).
std::vector<double> propensity_scores(const OutcomePanel& panel);

// Unit behaviors countable in a window. "Peer" means on a site the unit does
// not author at the moment of the event.
enum class OutcomeKind {
    journal_updates,
    peer_first_visits,  // first-ever visit by the unit to that site
    peer_repeat_visits, // later visits
    peer_interactions,  // reactions, comments, guestbooks on peer sites
    peer_initiations,   // first interaction with a site, as an author
    self_site_interactions,
};
constexpr int kOutcomeKindCount = 6;
const std::string& outcome_kind_name(OutcomeKind k);
std::optional<OutcomeKind> outcome_kind_from_name(const std::string& name);

struct UnitSpec {
    std::string unit; // user name in the log
    int treated = 0;
    std::optional<std::string> batch;        // groups units for fabricated times
    std::optional<std::int64_t> event_time;  // anchor; fabricated when absent
};

struct PanelBuildResult {
    OutcomePanel panel;
    std::size_t n_excluded = 0; // units absent from the log or with no usable anchor
    std::vector<std::string> excluded_units;
};

// Builds a panel anchored at each unit's event time: covariates count each
// behavior in [t - pre_weeks, t) plus the unit's tenure, the outcome counts
// `outcome` in [t, t + post_weeks). Units without an event time get one
// sampled (keyed by seed and unit) from the known times of units in the same
// batch, falling back to all known times; units with neither any anchor nor
// a log presence are excluded and counted.
PanelBuildResult build_outcome_panel(const EventLog& log, const std::vector<UnitSpec>& units,
                                     OutcomeKind outcome, int pre_weeks, int post_weeks,
                                     std::uint64_t seed);

// Cohen's d in simple form: the mean of the targeted behavior over its
// standard deviation. Throws when sd is not positive.
double cohens_d_simple(double mean_value, double sd);

// Difference-in-differences form: the control group's before/after drop
// minus the participant group's, over the pooled standard deviation.
struct DidInput {
    double control_before = 0.0;
    double control_after = 0.0;
    double participant_before = 0.0;
    double participant_after = 0.0;
    double sd_pooled = 0.0;
};
double cohens_d_did(const DidInput& in);

struct PowerRequest {
    double effect_size_rho = 0.0; // point-biserial correlation, in (0, 1)
    double alpha = 0.05;
    double power = 0.8;
    int tails = 1;
};

// Smallest n such that a t test of the point-biserial correlation rho at
// level alpha reaches the requested power, using the noncentral t with
// df = n - 2 and noncentrality rho * sqrt(n) / sqrt(1 - rho^2). Searches
// n in [4, 10^7].
long required_sample_size(const PowerRequest& req);

struct GroupMetricRow {
    std::string metric;
    double median_a = 0.0, median_b = 0.0;
    double mean_a = 0.0, mean_b = 0.0;
    double sd_a = 0.0, sd_b = 0.0;
    double mean_diff = 0.0; // a - b
    double welch_p = 1.0;   // two-sided
    double cles = 0.5;      // P(a > b) with ties counted half
};

struct MetricSamples {
    std::string name;
    std::vector<double> a;
    std::vector<double> b;
};

struct GroupDifferenceReport {
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    std::vector<GroupMetricRow> rows;
};

// Per-metric medians, means with SDs, mean difference, Welch's t p-value,
// and the common-language effect size (the normalized Mann-Whitney U).
GroupDifferenceReport group_difference_report(const std::vector<MetricSamples>& metrics);

} // namespace rec
