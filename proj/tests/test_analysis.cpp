#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "recengine/analysis.hpp"
#include "recengine/rng.hpp"
#include "recengine/stats.hpp"

#include "helpers.hpp"

using namespace rec;
using namespace testutil;

namespace {

std::filesystem::path scratch_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_text(const std::filesystem::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    REQUIRE(os.good());
    os << content;
}

// A panel with a continuous confounder: units with high x are both likelier
// to be treated and have higher outcomes, so the raw contrast overstates the
// true additive effect `tau`.
OutcomePanel confounded_panel(std::size_t n, double tau, std::uint64_t seed) {
    OutcomePanel panel;
    panel.covariate_names = {"x"};
    Rng rng(seed, "confounded-panel");
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        const double p_treat = 1.0 / (1.0 + std::exp(-1.5 * x));
        const int t = rng.next_double() < p_treat ? 1 : 0;
        const double y = 2.0 + tau * t + 2.0 * x + 0.5 * rng.normal();
        panel.unit_ids.push_back("u" + std::to_string(i));
        panel.treated.push_back(t);
        panel.covariates.push_back(x);
        panel.outcome.push_back(y);
    }
    return panel;
}

OutcomePanel plain_panel(std::initializer_list<double> treated_y,
                         std::initializer_list<double> control_y) {
    OutcomePanel panel;
    int i = 0;
    for (double y : treated_y) {
        panel.unit_ids.push_back("t" + std::to_string(i++));
        panel.treated.push_back(1);
        panel.outcome.push_back(y);
    }
    for (double y : control_y) {
        panel.unit_ids.push_back("c" + std::to_string(i++));
        panel.treated.push_back(0);
        panel.outcome.push_back(y);
    }
    return panel;
}

} // namespace

TEST_CASE("panel files round-trip through CSV") {
    OutcomePanel panel;
    panel.covariate_names = {"pre_visits", "odd, name"};
    panel.pre_weeks = 4;
    panel.post_weeks = 10;
    panel.unit_ids = {"amy", "kim, jr"};
    panel.treated = {1, 0};
    panel.covariates = {0.5, -3.25, 1e-9, 7.0};
    panel.outcome = {2.0, 0.1};

    const auto path = scratch_file("recengine-panel-roundtrip.csv");
    write_panel_csv(panel, path.string());
    const auto loaded = read_panel_csv(path.string());
    CHECK(loaded.covariate_names == panel.covariate_names);
    CHECK(loaded.unit_ids == panel.unit_ids);
    CHECK(loaded.treated == panel.treated);
    CHECK(loaded.pre_weeks == 4);
    CHECK(loaded.post_weeks == 10);
    REQUIRE(loaded.covariates.size() == panel.covariates.size());
    for (std::size_t i = 0; i < panel.covariates.size(); ++i) {
        CHECK(loaded.covariates[i] == panel.covariates[i]); // %.17g is lossless
    }
    CHECK(loaded.outcome == panel.outcome);
    std::filesystem::remove(path);
}

TEST_CASE("panel loading rejects malformed rows by line and column") {
    const auto path = scratch_file("recengine-panel-bad.csv");

    SUBCASE("missing value") {
        write_text(path, "unit,treated,x,outcome\nu1,1,,5\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 2: missing value in column 'x'", std::runtime_error);
    }
    SUBCASE("NA sentinel counts as missing") {
        write_text(path, "unit,treated,x,outcome\nu1,1,2.0,NA\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 2: missing value in column 'outcome'", std::runtime_error);
    }
    SUBCASE("non-numeric value") {
        write_text(path, "unit,treated,x,outcome\nu1,1,abc,5\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 2: invalid number 'abc' in column 'x'", std::runtime_error);
    }
    SUBCASE("treatment flag outside 0/1") {
        write_text(path, "unit,treated,x,outcome\nu1,2,0.0,5\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 2: treated must be 0 or 1, got '2'", std::runtime_error);
    }
    SUBCASE("wrong column count") {
        write_text(path, "unit,treated,x,outcome\nu1,1,5\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 2: expected 4 fields, got 3", std::runtime_error);
    }
    SUBCASE("bad header") {
        write_text(path, "id,treated,outcome\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()),
                             "line 1: header must be unit,treated,<covariates...>,outcome",
                             std::runtime_error);
    }
    SUBCASE("unterminated quote") {
        write_text(path, "unit,treated,outcome\n\"u1,1,5\n");
        CHECK_THROWS_WITH_AS(read_panel_csv(path.string()), "line 2: unterminated quote",
                             std::runtime_error);
    }
    SUBCASE("empty file") {
        write_text(path, "");
        CHECK_THROWS_AS(read_panel_csv(path.string()), std::runtime_error);
    }
    SUBCASE("comment lines carry the window metadata and blanks are skipped") {
        write_text(path, "# pre_weeks=3 post_weeks=9\n\nunit,treated,outcome\nu1,1,5\nu2,0,2\n");
        const auto panel = read_panel_csv(path.string());
        CHECK(panel.pre_weeks == 3);
        CHECK(panel.post_weeks == 9);
        CHECK(panel.n() == 2);
        CHECK(panel.p() == 0);
    }
    std::filesystem::remove(path);
}

TEST_CASE("method and outcome names round-trip") {
    for (const auto m : {EffectMethod::raw, EffectMethod::ols, EffectMethod::doubly_robust}) {
        CHECK(effect_method_from_name(effect_method_name(m)) == m);
    }
    CHECK_FALSE(effect_method_from_name("anova").has_value());
    for (int k = 0; k < kOutcomeKindCount; ++k) {
        const auto kind = static_cast<OutcomeKind>(k);
        CHECK(outcome_kind_from_name(outcome_kind_name(kind)) == kind);
    }
    CHECK_FALSE(outcome_kind_from_name("page_views").has_value());
}

TEST_CASE("with no covariates all three estimators give the group-mean gap") {
    const auto panel = plain_panel({4.0, 6.0, 5.5, 4.5, 5.0, 6.5, 3.5, 5.0},
                                   {2.0, 4.0, 3.0, 2.5, 3.5, 3.0, 2.0, 4.0, 3.0, 3.0});
    const double gap = stats::mean({4.0, 6.0, 5.5, 4.5, 5.0, 6.5, 3.5, 5.0}) -
                       stats::mean({2.0, 4.0, 3.0, 2.5, 3.5, 3.0, 2.0, 4.0, 3.0, 3.0});
    const auto raw = raw_effect(panel, 5, 50);
    const auto ols = ols_effect(panel, 5, 50);
    const auto dr = doubly_robust_effect(panel, 5, 50);
    CHECK(raw.point == doctest::Approx(gap).epsilon(1e-12));
    CHECK(ols.point == doctest::Approx(gap).epsilon(1e-10));
    CHECK(dr.point == doctest::Approx(gap).epsilon(1e-10));
    CHECK(raw.n_treated == 8);
    CHECK(raw.n_control == 10);
    CHECK(raw.n_bootstrap == 50);
    CHECK(raw.ci_low <= raw.point);
    CHECK(raw.point <= raw.ci_high);
}

TEST_CASE("adjustment removes confounding that the raw contrast absorbs") {
    const double tau = 1.0;
    const auto panel = confounded_panel(400, tau, 303);
    const auto raw = raw_effect(panel, 7, 200);
    const auto ols = ols_effect(panel, 7, 200);
    const auto dr = doubly_robust_effect(panel, 7, 200);

    CHECK(raw.point > tau + 0.5); // text-book confounding: raw overshoots
    CHECK(std::abs(ols.point - tau) < 0.2);
    CHECK(std::abs(dr.point - tau) < 0.2);
    CHECK(dr.ci_low < tau);
    CHECK(tau < dr.ci_high);
    // confidence intervals are ordered and non-degenerate
    CHECK(dr.ci_low < dr.ci_high);
}

TEST_CASE("bootstrap is seed-keyed and stratified by arm") {
    const auto panel = plain_panel({4.0, 6.0, 5.0, 7.0, 5.5}, {2.0, 1.0, 3.0, 2.5, 1.5, 2.0});
    const auto a = raw_effect(panel, 11, 300);
    const auto b = raw_effect(panel, 11, 300);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    const auto c = raw_effect(panel, 12, 300);
    CHECK((c.ci_low != a.ci_low || c.ci_high != a.ci_high));

    // constant outcomes per arm: stratified resampling can only ever produce
    // the same contrast, so the interval collapses onto the point
    const auto degenerate = plain_panel({10.0, 10.0, 10.0}, {1.0, 1.0, 1.0, 1.0});
    const auto est = raw_effect(degenerate, 3, 100);
    CHECK(est.point == doctest::Approx(9.0));
    CHECK(est.ci_low == doctest::Approx(9.0));
    CHECK(est.ci_high == doctest::Approx(9.0));

    const auto all_treated = plain_panel({1.0, 2.0}, {});
    CHECK_THROWS_WITH_AS(raw_effect(all_treated, 1, 10),
                         "panel needs both treated and control units", std::invalid_argument);
    CHECK_THROWS_AS(raw_effect(panel, 1, 0), std::invalid_argument);
}

TEST_CASE("rank-deficient adjustment names the collinear column") {
    OutcomePanel panel;
    panel.covariate_names = {"x", "x_copy"};
    for (int i = 0; i < 12; ++i) {
        panel.unit_ids.push_back("u" + std::to_string(i));
        panel.treated.push_back(i % 2);
        const double x = i * 0.5;
        panel.covariates.push_back(x);
        panel.covariates.push_back(x); // perfectly collinear
        panel.outcome.push_back(x + (i % 2));
    }
    CHECK_THROWS_AS(ols_effect(panel, 1, 10), std::exception);
    try {
        ols_effect(panel, 1, 10);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("x_copy") != std::string::npos);
    }
}

TEST_CASE("logistic regression recovers known coefficients") {
    const std::size_t n = 4000;
    std::vector<double> x(n);
    std::vector<int> y(n);
    Rng rng(99, "logistic-sim");
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(-2.0, 2.0);
        const double p = 1.0 / (1.0 + std::exp(-(0.5 + 1.2 * x[i])));
        y[i] = rng.next_double() < p ? 1 : 0;
    }
    const auto fit = logistic_irls(x, n, 1, y);
    CHECK(fit.converged);
    REQUIRE(fit.coef.size() == 2);
    CHECK(fit.coef[0] == doctest::Approx(0.5).epsilon(0.35));
    CHECK(fit.coef[1] == doctest::Approx(1.2).epsilon(0.25));

    CHECK_THROWS_AS(logistic_irls({}, 0, 0, {}), std::invalid_argument);
    CHECK_THROWS_AS(logistic_irls(x, n, 2, y), std::invalid_argument);
}

TEST_CASE("separable data plateaus at the clip bounds instead of diverging") {
    // perfectly separated: y = 1 exactly when x > 0
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 1; i <= 40; ++i) {
        x.push_back(i * 0.1);
        y.push_back(1);
        x.push_back(-i * 0.1);
        y.push_back(0);
    }
    const LogisticFit fit = logistic_irls(x, x.size(), 1, y);
    CHECK(fit.converged);
    CHECK(fit.coef[1] > 0.0); // slope points the right way

    OutcomePanel panel;
    panel.covariate_names = {"x"};
    for (std::size_t i = 0; i < x.size(); ++i) {
        panel.unit_ids.push_back("u" + std::to_string(i));
        panel.treated.push_back(y[i]);
        panel.covariates.push_back(x[i]);
        panel.outcome.push_back(0.0);
    }
    const auto scores = propensity_scores(panel);
    REQUIRE(scores.size() == x.size());
    for (double e : scores) {
        CHECK(e >= 0.01);
        CHECK(e <= 0.99);
    }
    // most extreme units sit exactly on the clip bounds
    CHECK(scores[x.size() - 2] == doctest::Approx(0.99)); // x = +4.0
    CHECK(scores[x.size() - 1] == doctest::Approx(0.01)); // x = -4.0
}

TEST_CASE("outcome panel counts each behavior in its window") {
    const std::int64_t t0 = day(70);
    std::vector<EventRecord> recs;
    add_updates(recs, "anna", "a-site", day(0), 3);
    add_updates(recs, "bert", "b-site", day(0) + kHour, 3);
    // anna, inside the 2-week pre window [day 56, day 70):
    recs.push_back(journal(day(60), "anna", "a-site", "pre update"));
    recs.push_back(ev(day(58), EventKind::visit, "anna", "b-site"));  // first peer visit
    recs.push_back(ev(day(59), EventKind::visit, "anna", "b-site"));  // repeat peer visit
    recs.push_back(ev(day(61), EventKind::visit, "anna", "a-site"));  // own site: neither
    recs.push_back(comment(day(57), "anna", "b-site"));  // peer interaction + initiation
    recs.push_back(comment(day(65), "anna", "a-site"));  // self-site interaction
    recs.push_back(ev(day(40), EventKind::visit, "anna", "b-site")); // before window: sets "seen"
    // anna, inside the 3-week post window [day 70, day 91):
    recs.push_back(journal(t0, "anna", "a-site", "at the anchor"));
    recs.push_back(journal(day(90), "anna", "a-site", "just inside"));
    recs.push_back(journal(day(91), "anna", "a-site", "just outside"));
    const EventLog log(recs);

    std::vector<UnitSpec> units;
    units.push_back(UnitSpec{"anna", 1, std::string("wave-1"), t0});
    units.push_back(UnitSpec{"bert", 0, std::string("wave-1"), std::nullopt}); // fabricated anchor
    units.push_back(UnitSpec{"ghost", 0, std::nullopt, std::nullopt});         // not in the log

    const auto built =
        build_outcome_panel(log, units, OutcomeKind::journal_updates, 2, 3, 17);
    CHECK(built.n_excluded == 1);
    REQUIRE(built.excluded_units.size() == 1);
    CHECK(built.excluded_units[0] == "ghost");

    const auto& panel = built.panel;
    REQUIRE(panel.n() == 2);
    REQUIRE(panel.p() == 7); // six behaviors + tenure
    CHECK(panel.covariate_names[0] == "pre_journal_updates");
    CHECK(panel.covariate_names[6] == "tenure_weeks");
    CHECK(panel.pre_weeks == 2);
    CHECK(panel.post_weeks == 3);

    const double* anna = panel.row(0);
    CHECK(anna[0] == 1.0); // journal day 60
    // day-40 visit happened first, so the day-58 one is already a repeat
    CHECK(anna[1] == 0.0);
    CHECK(anna[2] == 2.0); // repeat visits day 58 + 59
    CHECK(anna[3] == 1.0); // comment on b-site
    CHECK(anna[4] == 1.0); // that comment was anna's first contact: an initiation
    CHECK(anna[5] == 1.0); // comment on a-site
    CHECK(anna[6] == doctest::Approx(10.0)); // day 0 first update -> 70 days = 10 weeks
    CHECK(panel.outcome[0] == 2.0); // anchor-day + day-90 updates; day-91 excluded
    CHECK(panel.treated[0] == 1);

    // bert's anchor is drawn from his batch pool, which only contains t0
    const double* bert = panel.row(1);
    for (int k = 0; k < 6; ++k) CHECK(bert[k] == 0.0);
    CHECK(bert[6] == doctest::Approx(10.0).epsilon(0.01));
    CHECK(panel.outcome[1] == 0.0);

    // no anchor anywhere: the unit is excluded rather than guessed at
    const auto orphan = build_outcome_panel(
        log, {UnitSpec{"anna", 1, std::nullopt, std::nullopt}}, OutcomeKind::journal_updates,
        2, 3, 17);
    CHECK(orphan.panel.n() == 0);
    CHECK(orphan.n_excluded == 1);

    CHECK_THROWS_AS(
        build_outcome_panel(log, units, OutcomeKind::journal_updates, 0, 3, 17),
        std::invalid_argument);
}

TEST_CASE("effect size helpers") {
    CHECK(cohens_d_simple(3.0, 2.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(cohens_d_simple(1.0, 0.0), std::invalid_argument);

    DidInput in;
    in.control_before = 10.0;
    in.control_after = 6.0;     // control dropped by 4
    in.participant_before = 10.0;
    in.participant_after = 9.0; // participants dropped by 1
    in.sd_pooled = 1.5;
    CHECK(cohens_d_did(in) == doctest::Approx((4.0 - 1.0) / 1.5));
    in.sd_pooled = 0.0;
    CHECK_THROWS_AS(cohens_d_did(in), std::invalid_argument);
}

TEST_CASE("required sample size grows as the expected effect shrinks") {
    PowerRequest req;
    req.alpha = 0.05;
    req.power = 0.8;
    req.tails = 1;

    req.effect_size_rho = 0.28;
    const long n28 = required_sample_size(req);
    req.effect_size_rho = 0.26;
    const long n26 = required_sample_size(req);
    req.effect_size_rho = 0.14;
    const long n14 = required_sample_size(req);
    req.effect_size_rho = 0.12;
    const long n12 = required_sample_size(req);

    CHECK(n28 == 75);
    CHECK(n26 == 87);
    CHECK(n14 == 311);
    CHECK(n12 == 425);
    CHECK(n28 < n26);
    CHECK(n26 < n14);
    CHECK(n14 < n12);

    // two-tailed tests need more units at the same rho
    req.effect_size_rho = 0.28;
    req.tails = 2;
    CHECK(required_sample_size(req) > n28);

    req.tails = 3;
    CHECK_THROWS_AS(required_sample_size(req), std::invalid_argument);
    req.tails = 1;
    req.effect_size_rho = 1.0;
    CHECK_THROWS_AS(required_sample_size(req), std::invalid_argument);
    req.effect_size_rho = 0.28;
    req.alpha = 0.0;
    CHECK_THROWS_AS(required_sample_size(req), std::invalid_argument);
}

TEST_CASE("group reports summarize each metric with Welch and CLES") {
    MetricSamples same;
    same.name = "mrr";
    same.a = {1.0, 2.0, 3.0};
    same.b = {1.0, 2.0, 3.0};
    MetricSamples shifted;
    shifted.name = "hr5";
    shifted.a = {4.0, 5.0, 6.0, 7.0};
    shifted.b = {1.0, 2.0, 3.0};

    const auto report = group_difference_report({same, shifted});
    CHECK(report.n_a == 3);
    CHECK(report.n_b == 3);
    REQUIRE(report.rows.size() == 2);

    const auto& r0 = report.rows[0];
    CHECK(r0.metric == "mrr");
    CHECK(r0.mean_diff == doctest::Approx(0.0));
    CHECK(r0.median_a == doctest::Approx(2.0));
    CHECK(r0.welch_p == doctest::Approx(1.0));
    CHECK(r0.cles == doctest::Approx(0.5)); // ties count half

    const auto& r1 = report.rows[1];
    CHECK(r1.metric == "hr5");
    CHECK(r1.mean_a == doctest::Approx(5.5));
    CHECK(r1.mean_b == doctest::Approx(2.0));
    CHECK(r1.mean_diff == doctest::Approx(3.5));
    CHECK(r1.cles == doctest::Approx(1.0)); // every a beats every b
    CHECK(r1.welch_p < 0.05);
    CHECK(r1.welch_p == doctest::Approx(stats::welch_t_test(shifted.a, shifted.b).p));

    CHECK_THROWS_WITH_AS(group_difference_report({MetricSamples{"empty", {}, {1.0}}}),
                         "group difference needs nonempty groups for metric 'empty'",
                         std::invalid_argument);
}
