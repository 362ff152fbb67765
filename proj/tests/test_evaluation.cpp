#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "recengine/batcher.hpp"
#include "recengine/evaluation.hpp"
#include "recengine/rng.hpp"
#include "recengine/stats.hpp"
#include "recengine/synthetic.hpp"

#include "helpers.hpp"

using namespace rec;
using namespace testutil;

namespace {

EmbedderSpec tiny_embedder() {
    EmbedderSpec spec;
    spec.dim = 8;
    spec.seed = 5;
    return spec;
}

FeatureConfig tiny_features() {
    FeatureConfig f;
    f.text_dim = 8;
    return f;
}

// Independent oracle: rank one initiation's target site by scoring every
// candidate pair directly and merging mean-then-max by hand.
struct OracleRank {
    bool skipped_no_source = false;
    bool skipped_target_missing = false;
    int rank = 0;
    int n_candidates = 0;
};

OracleRank rank_oracle(const ScorerModel& model, const EventLog& log,
                       const std::vector<Initiation>& history, const Initiation& target,
                       const TextEmbedder& embedder) {
    OracleRank out;
    const auto sources = eligible_source_pairs(log, target.source, target.ts);
    if (sources.empty()) {
        out.skipped_no_source = true;
        return out;
    }
    const auto cands = candidate_pairs(log, target.source, target.ts);
    GraphTimeline tl(log, history);
    const SiteInitiationIndex si(log.n_sites(), history);
    const ScoringContext ctx{log, tl.advance_to(target.ts), si, embedder, target.ts};

    std::map<int, double> site_best; // max over a site's author pairs
    for (const auto& cand : cands) {
        double mean_score = 0.0;
        for (const auto& src : sources) {
            mean_score += score_pair(model, src, cand, ctx);
        }
        mean_score /= static_cast<double>(sources.size());
        auto [it, fresh] = site_best.try_emplace(cand.site, mean_score);
        if (!fresh) it->second = std::max(it->second, mean_score);
    }
    out.n_candidates = static_cast<int>(site_best.size());
    const auto target_it = site_best.find(target.target_site);
    if (target_it == site_best.end()) {
        out.skipped_target_missing = true;
        return out;
    }
    int rank = 0;
    for (const auto& [site, score] : site_best) {
        if (score >= target_it->second) ++rank;
    }
    out.rank = rank;
    return out;
}

} // namespace

TEST_CASE("split validation demands strictly increasing boundaries") {
    SplitSpec bad;
    bad.train_end_ts = 10;
    bad.validation_end_ts = 10;
    bad.test_end_ts = 20;
    CHECK_THROWS_AS(validate_split(bad), std::invalid_argument);
    bad.validation_end_ts = 5;
    CHECK_THROWS_AS(validate_split(bad), std::invalid_argument);
    SplitSpec good;
    good.train_end_ts = 10;
    good.validation_end_ts = 11;
    good.test_end_ts = 12;
    CHECK_NOTHROW(validate_split(good));
}

TEST_CASE("chronological split partitions without loss inside the window") {
    std::vector<Initiation> inits;
    for (int i = 0; i < 100; ++i) {
        Initiation init;
        init.source = i;
        init.target_site = i;
        init.ts = day(i);
        inits.push_back(init);
    }
    SplitSpec spec;
    spec.train_end_ts = day(60);
    spec.validation_end_ts = day(80);
    spec.test_end_ts = day(95);
    const auto parts = chronological_split(inits, spec);

    CHECK(parts.train.size() == 60);       // days 0..59
    CHECK(parts.validation.size() == 20);  // days 60..79
    CHECK(parts.test.size() == 15);        // days 80..94
    CHECK(parts.n_dropped == 5);           // days 95..99
    for (const auto& i : parts.train) CHECK(i.ts < spec.train_end_ts);
    for (const auto& i : parts.validation) {
        CHECK(i.ts >= spec.train_end_ts);
        CHECK(i.ts < spec.validation_end_ts);
    }
    for (const auto& i : parts.test) {
        CHECK(i.ts >= spec.validation_end_ts);
        CHECK(i.ts < spec.test_end_ts);
    }
}

TEST_CASE("fraction-based boundaries land near the requested shares") {
    std::vector<Initiation> inits;
    for (int i = 0; i < 200; ++i) {
        Initiation init;
        init.ts = day(i * 0.25);
        inits.push_back(init);
    }
    const auto spec = split_from_fractions(inits, 0.8, 0.1);
    const auto parts = chronological_split(inits, spec);
    CHECK(parts.train.size() == 160);
    CHECK(parts.validation.size() == 20);
    CHECK(parts.test.size() == 20);
    CHECK(parts.n_dropped == 0);

    CHECK_THROWS_AS(split_from_fractions(inits, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(split_from_fractions(inits, 0.7, 0.4), std::invalid_argument);
    CHECK_THROWS_AS(split_from_fractions({}, 0.8, 0.1), std::invalid_argument);
}

TEST_CASE("competition ranking: tied leaders share rank two") {
    // Two sites tie at the top by initiation count; the target is one of
    // them. Rank must be 2 for both tied leaders (nobody is rank 1), so the
    // reciprocal rank is exactly one half.
    std::vector<EventRecord> recs;
    add_updates(recs, "src", "s-src", day(0), 3);
    add_updates(recs, "a", "s-a", day(0), 3);
    add_updates(recs, "b", "s-b", day(0), 3);
    add_updates(recs, "c", "s-c", day(0), 3);
    add_updates(recs, "d", "s-d", day(0), 3);
    // s-a and s-b each get one initiation inside the trailing week before
    // day 14; s-c gets none. (d's comments create them.)
    recs.push_back(comment(day(9), "d", "s-a"));
    recs.push_back(comment(day(10), "d", "s-b"));
    // keep everyone active
    for (const char* who : {"src", "a", "b", "c", "d"}) {
        recs.push_back(comment(day(13), who, std::string("s-") + (who[0] == 's' ? "src" : who)));
    }
    // the measured initiation: src contacts s-a at day 14
    recs.push_back(comment(day(14), "src", "s-a"));
    const EventLog log(recs);
    const auto inits = extract_initiations(log);
    REQUIRE(inits.back().ts == day(14));

    const auto model =
        make_baseline(ScorerKind::most_inits, tiny_features(), tiny_embedder(), 1);
    const TextEmbedder emb(tiny_embedder());
    const std::vector<Initiation> targets{inits.back()};
    const auto run = rank_targets(model, log, inits, targets, emb);
    REQUIRE(run.results.size() == 1);
    CHECK(run.results[0].rank == 2);
    const auto metrics = compute_metrics(run.results);
    CHECK(metrics.mrr == doctest::Approx(0.5));
    CHECK(metrics.hr1 == 0.0);
    CHECK(metrics.hr5 == 1.0);
}

TEST_CASE("rank_targets agrees with the standalone oracle across scorers") {
    SyntheticConfig cfg;
    cfg.n_authors = 100;
    cfg.n_sites = 120;
    cfg.horizon_days = 60;
    cfg.homophily = 0.5;
    cfg.seed = 47;
    const EventLog log = generate_synthetic_log(cfg);
    const auto inits = extract_initiations(log);
    REQUIRE(inits.size() > 50);
    const TextEmbedder emb(tiny_embedder());

    // targets: the last quarter of initiations
    const std::size_t start = inits.size() * 3 / 4;
    const std::vector<Initiation> targets(inits.begin() + static_cast<std::ptrdiff_t>(start),
                                          inits.end());

    for (const ScorerKind kind : {ScorerKind::most_inits, ScorerKind::recent_journals,
                                  ScorerKind::random_scorer, ScorerKind::people_you_know}) {
        CAPTURE(scorer_kind_name(kind));
        const auto model = make_baseline(kind, tiny_features(), tiny_embedder(), 13);
        const auto run = rank_targets(model, log, inits, targets, emb);

        std::size_t oracle_skipped_source = 0, oracle_skipped_missing = 0;
        std::vector<OracleRank> expected;
        for (const auto& t : targets) {
            const auto o = rank_oracle(model, log, inits, t, emb);
            if (o.skipped_no_source) {
                ++oracle_skipped_source;
            } else if (o.skipped_target_missing) {
                ++oracle_skipped_missing;
            } else {
                expected.push_back(o);
            }
        }
        CHECK(run.n_skipped_no_source_pair == oracle_skipped_source);
        CHECK(run.n_skipped_target_missing == oracle_skipped_missing);
        REQUIRE(run.results.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CAPTURE(i);
            CHECK(run.results[i].rank == expected[i].rank);
            CHECK(run.results[i].n_candidates == expected[i].n_candidates);
        }
    }
}

TEST_CASE("ranking is identical for any thread count") {
    SyntheticConfig cfg;
    cfg.n_authors = 80;
    cfg.n_sites = 100;
    cfg.horizon_days = 50;
    cfg.seed = 53;
    const EventLog log = generate_synthetic_log(cfg);
    const auto inits = extract_initiations(log);
    const TextEmbedder emb(tiny_embedder());
    const std::vector<Initiation> targets(inits.begin() + static_cast<std::ptrdiff_t>(
                                              inits.size() / 2),
                                          inits.end());
    const auto model =
        make_baseline(ScorerKind::most_journals, tiny_features(), tiny_embedder(), 3);

    const auto run1 = rank_targets(model, log, inits, targets, emb, 1);
    for (int threads : {2, 3, 8}) {
        CAPTURE(threads);
        const auto runN = rank_targets(model, log, inits, targets, emb, threads);
        REQUIRE(runN.results.size() == run1.results.size());
        for (std::size_t i = 0; i < run1.results.size(); ++i) {
            CHECK(runN.results[i].rank == run1.results[i].rank);
            CHECK(runN.results[i].n_candidates == run1.results[i].n_candidates);
            CHECK(runN.results[i].initiation_index == run1.results[i].initiation_index);
        }
        CHECK(runN.n_skipped_target_missing == run1.n_skipped_target_missing);
        CHECK(runN.n_skipped_no_source_pair == run1.n_skipped_no_source_pair);
    }
}

TEST_CASE("metrics compute MRR and hit rates from ranks") {
    std::vector<RankResult> results;
    for (const auto& [rank, n] : std::vector<std::pair<int, int>>{
             {1, 10}, {2, 10}, {5, 10}, {10, 10}}) {
        RankResult r;
        r.rank = rank;
        r.n_candidates = n;
        results.push_back(r);
    }
    const auto m = compute_metrics(results);
    CHECK(m.n_evaluated == 4);
    CHECK(m.mrr == doctest::Approx((1.0 + 0.5 + 0.2 + 0.1) / 4.0));
    CHECK(m.hr1 == doctest::Approx(0.25));
    CHECK(m.hr5 == doctest::Approx(0.75));
    CHECK(m.median_candidates == doctest::Approx(10.0));
    CHECK_THROWS_AS(compute_metrics({}), std::invalid_argument);
}

TEST_CASE("median across seeds is field-wise") {
    MetricsReport a, b, c;
    a.mrr = 0.1; a.hr1 = 0.3; a.hr5 = 0.9; a.n_evaluated = 100; a.median_candidates = 5;
    b.mrr = 0.3; b.hr1 = 0.1; b.hr5 = 0.7; b.n_evaluated = 90;  b.median_candidates = 7;
    c.mrr = 0.2; c.hr1 = 0.2; c.hr5 = 0.8; c.n_evaluated = 95;  c.median_candidates = 6;
    const auto m = median_metrics({a, b, c});
    CHECK(m.mrr == doctest::Approx(0.2));
    CHECK(m.hr1 == doctest::Approx(0.2));
    CHECK(m.hr5 == doctest::Approx(0.8));
    CHECK(m.median_candidates == doctest::Approx(6.0));
    CHECK(m.n_evaluated == 90); // most conservative run
    CHECK_THROWS_AS(median_metrics({}), std::invalid_argument);
}

TEST_CASE("coverage on a symmetric world") {
    // Everyone is eligible and active; a random scorer should spread its
    // recommendations widely.
    SmallWorld world(40);
    // cross initiations so sites are not all siloed
    for (int i = 0; i < 10; ++i) {
        world.events.push_back(comment(day(9.6) + i, SmallWorld::user(i),
                                       SmallWorld::site(i + 10)));
    }
    const EventLog log = world.log();
    const auto inits = extract_initiations(log);
    const TextEmbedder emb(tiny_embedder());
    const auto model =
        make_baseline(ScorerKind::random_scorer, tiny_features(), tiny_embedder(), 21);

    const auto report = coverage_eval(model, log, inits, day(10), emb, 30, 5, 77);
    CHECK(report.n_sampled == 30);
    CHECK_FALSE(report.sample_short);
    CHECK(report.k == 5);
    CHECK(report.r_size > 25);     // random spread over 39 candidate sites
    CHECK(report.pct_unique == doctest::Approx(static_cast<double>(report.r_size) / 150.0));
    CHECK(report.mmst_weeks > 0.0);

    // asking for more seekers than exist flags the shortfall
    const auto short_report = coverage_eval(model, log, inits, day(10), emb, 500, 5, 77);
    CHECK(short_report.sample_short);
    CHECK(short_report.n_sampled == 40);
}

TEST_CASE("coverage sampling is keyed by seed") {
    SmallWorld world(30);
    for (int i = 0; i < 8; ++i) {
        world.events.push_back(comment(day(9.6) + i, SmallWorld::user(i),
                                       SmallWorld::site(i + 10)));
    }
    const EventLog log = world.log();
    const auto inits = extract_initiations(log);
    const TextEmbedder emb(tiny_embedder());
    const auto model =
        make_baseline(ScorerKind::random_scorer, tiny_features(), tiny_embedder(), 1);
    const auto r1 = coverage_eval(model, log, inits, day(10), emb, 10, 5, 1);
    const auto r2 = coverage_eval(model, log, inits, day(10), emb, 10, 5, 1);
    CHECK(r1.r_size == r2.r_size);
    CHECK(r1.mmst_weeks == r2.mmst_weeks);
    CHECK(r1.siloed_pct_recced == r2.siloed_pct_recced);
}

TEST_CASE("drift bucketing matches a hand-built weekly OLS") {
    // synthesize results spanning seven weeks with varying ranks
    std::vector<RankResult> results;
    const std::int64_t train_end = day(0);
    std::uint64_t state = 7;
    for (int w = 0; w < 7; ++w) {
        const int per_week = 4 + static_cast<int>(splitmix64(state) % 4);
        for (int i = 0; i < per_week; ++i) {
            RankResult r;
            r.ts = train_end + w * kMsPerWeek + static_cast<std::int64_t>(i + 1) * kMsPerHour;
            r.rank = 1 + static_cast<int>(splitmix64(state) % 9);
            r.n_candidates = 20;
            results.push_back(r);
        }
    }
    // independent weekly aggregation
    std::map<int, std::pair<double, int>> weeks;
    for (const auto& r : results) {
        const int w = static_cast<int>((r.ts - train_end) / kMsPerWeek);
        weeks[w].first += 1.0 / r.rank;
        weeks[w].second += 1;
    }
    std::vector<double> xs, ys;
    for (const auto& [w, acc] : weeks) {
        xs.push_back(w);
        ys.push_back(acc.first / acc.second);
    }
    const auto expect = stats::ols_slope(xs, ys);

    const auto drift = drift_check(results, train_end);
    CHECK(drift.slope == doctest::Approx(expect.slope).epsilon(1e-12));
    CHECK(drift.p_value == doctest::Approx(expect.p).epsilon(1e-12));
    CHECK(drift.n_weeks == 7);
}

TEST_CASE("drift detects a planted decline and stays quiet on flat data") {
    std::vector<RankResult> results;
    const std::int64_t train_end = day(0);
    // weeks 0..5: every result in week w has rank w+1 (decreasing weekly MRR)
    for (int w = 0; w < 6; ++w) {
        for (int i = 0; i < 5; ++i) {
            RankResult r;
            r.ts = train_end + w * kMsPerWeek + (i + 1) * kMsPerHour;
            r.rank = w + 1;
            r.n_candidates = 10;
            results.push_back(r);
        }
    }
    const auto declining = drift_check(results, train_end);
    CHECK(declining.slope < -0.05);
    CHECK(declining.p_value < 0.05);

    // constant rank 2 every week: slope exactly zero, p saturates at one
    for (auto& r : results) r.rank = 2;
    const auto flat = drift_check(results, train_end);
    CHECK(flat.slope == doctest::Approx(0.0));
    CHECK(flat.p_value == doctest::Approx(1.0));

    // under three weekly buckets: refuse
    std::vector<RankResult> narrow(results.begin(), results.begin() + 10);
    CHECK_THROWS_WITH_AS(drift_check(narrow, train_end),
                         "drift check needs at least three weekly buckets, got 2",
                         std::invalid_argument);
}
