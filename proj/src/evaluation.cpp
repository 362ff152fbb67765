#include "recengine/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "recengine/batcher.hpp"
#include "recengine/rng.hpp"
#include "recengine/stats.hpp"

namespace rec {

void validate_split(const SplitSpec& spec) {
    if (!(spec.train_end_ts < spec.validation_end_ts &&
          spec.validation_end_ts < spec.test_end_ts)) {
        throw std::invalid_argument("split boundaries must strictly increase");
    }
}

SplitSpec split_from_fractions(const std::vector<Initiation>& initiations, double train_frac,
                               double validation_frac) {
    if (initiations.empty()) throw std::invalid_argument("cannot split an empty initiation list");
    if (train_frac <= 0 || validation_frac < 0 || train_frac + validation_frac >= 1.0) {
        throw std::invalid_argument("split fractions must be positive and sum below 1");
    }
    std::vector<std::int64_t> ts;
    ts.reserve(initiations.size());
    for (const auto& i : initiations) ts.push_back(i.ts);
    std::sort(ts.begin(), ts.end());

    const auto n = ts.size();
    auto boundary = [&](double frac) {
        std::size_t idx = static_cast<std::size_t>(frac * static_cast<double>(n));
        if (idx >= n) idx = n - 1;
        return ts[idx]; // first timestamp of the next split
    };
    SplitSpec spec;
    spec.train_end_ts = boundary(train_frac);
    spec.validation_end_ts = boundary(train_frac + validation_frac);
    spec.test_end_ts = ts.back() + 1;
    if (spec.train_end_ts >= spec.validation_end_ts) spec.validation_end_ts = spec.train_end_ts + 1;
    if (spec.validation_end_ts >= spec.test_end_ts) spec.test_end_ts = spec.validation_end_ts + 1;
    return spec;
}

ChronologicalSplit chronological_split(const std::vector<Initiation>& initiations,
                                       const SplitSpec& spec) {
    validate_split(spec);
    ChronologicalSplit out;
    for (const auto& init : initiations) {
        if (init.ts < spec.train_end_ts) out.train.push_back(init);
        else if (init.ts < spec.validation_end_ts) out.validation.push_back(init);
        else if (init.ts < spec.test_end_ts) out.test.push_back(init);
        else ++out.n_dropped;
    }
    return out;
}

namespace {

// 0 = ranked, 1 = no eligible source pair, 2 = target not a candidate site.
struct TargetOutcome {
    char status = 0;
    int rank = 0;
    int n_candidates = 0;
};

TargetOutcome rank_one_target(const ScorerModel& model, const EventLog& log,
                              const Initiation& init, const ScoringContext& ctx) {
    const std::int64_t t = init.ts;
    TargetOutcome out;

    const auto sources = eligible_source_pairs(log, init.source, t);
    if (sources.empty()) {
        out.status = 1;
        return out;
    }
    const auto candidates = candidate_pairs(log, init.source, t);
    bool target_present = false;
    for (const auto& c : candidates) {
        if (c.site == init.target_site) {
            target_present = true;
            break;
        }
    }
    if (!target_present) {
        out.status = 2;
        return out;
    }

    std::vector<double> scores(sources.size() * candidates.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            scores[i * candidates.size() + j] = score_pair(model, sources[i], candidates[j], ctx);
        }
    }
    const auto merged =
        merge_pair_scores_to_sites(log, candidates, scores, sources.size(), model.seed);

    double target_score = 0.0;
    for (const auto& s : merged) {
        if (s.site == init.target_site) {
            target_score = s.score;
            break;
        }
    }
    for (const auto& s : merged) {
        if (s.score >= target_score) ++out.rank;
    }
    out.n_candidates = static_cast<int>(merged.size());
    return out;
}

} // namespace

RankRun rank_targets(const ScorerModel& model, const EventLog& log,
                     const std::vector<Initiation>& history,
                     const std::vector<Initiation>& targets, const TextEmbedder& embedder,
                     int n_threads) {
    const SiteInitiationIndex site_inits(log.n_sites(), history);
    std::vector<TargetOutcome> outcomes(targets.size());

    const std::size_t n = targets.size();
    std::size_t workers = n_threads < 1 ? 1 : static_cast<std::size_t>(n_threads);
    if (workers > n) workers = n == 0 ? 1 : n;

    auto run_range = [&](std::size_t lo, std::size_t hi, const TextEmbedder& emb) {
        GraphTimeline timeline(log, history);
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const auto& graph = timeline.advance_to(targets[idx].ts);
            const ScoringContext ctx{log, graph, site_inits, emb, targets[idx].ts};
            outcomes[idx] = rank_one_target(model, log, targets[idx], ctx);
        }
    };

    if (workers <= 1) {
        run_range(0, n, embedder);
    } else {
        const std::size_t chunk = (n + workers - 1) / workers;
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi, w]() {
                try {
                    // Each worker owns a graph replay and an embedding cache,
                    // so the outcome per target is thread-count independent.
                    const TextEmbedder local(embedder);
                    run_range(lo, hi, local);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    RankRun run;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const auto& o = outcomes[idx];
        if (o.status == 1) ++run.n_skipped_no_source_pair;
        else if (o.status == 2) ++run.n_skipped_target_missing;
        else {
            run.results.push_back(
                RankResult{static_cast<int>(idx), targets[idx].ts, o.rank, o.n_candidates});
        }
    }
    return run;
}

MetricsReport compute_metrics(const std::vector<RankResult>& results) {
    if (results.empty()) throw std::invalid_argument("no ranked results to aggregate");
    MetricsReport report;
    report.n_evaluated = results.size();
    std::vector<double> n_cands;
    n_cands.reserve(results.size());
    for (const auto& r : results) {
        report.mrr += 1.0 / static_cast<double>(r.rank);
        if (r.rank <= 1) report.hr1 += 1.0;
        if (r.rank <= 5) report.hr5 += 1.0;
        n_cands.push_back(static_cast<double>(r.n_candidates));
    }
    const auto n = static_cast<double>(results.size());
    report.mrr /= n;
    report.hr1 /= n;
    report.hr5 /= n;
    report.median_candidates = stats::median(std::move(n_cands));
    return report;
}

MetricsReport median_metrics(const std::vector<MetricsReport>& per_seed) {
    if (per_seed.empty()) throw std::invalid_argument("no reports to take a median over");
    auto field_median = [&](auto proj) {
        std::vector<double> v;
        v.reserve(per_seed.size());
        for (const auto& r : per_seed) v.push_back(proj(r));
        return stats::median(std::move(v));
    };
    MetricsReport m;
    m.mrr = field_median([](const MetricsReport& r) { return r.mrr; });
    m.hr1 = field_median([](const MetricsReport& r) { return r.hr1; });
    m.hr5 = field_median([](const MetricsReport& r) { return r.hr5; });
    m.median_candidates = field_median([](const MetricsReport& r) { return r.median_candidates; });
    m.n_evaluated = per_seed.front().n_evaluated;
    for (const auto& r : per_seed) m.n_evaluated = std::min(m.n_evaluated, r.n_evaluated);
    return m;
}

CoverageReport coverage_eval(const ScorerModel& model, const EventLog& log,
                             const std::vector<Initiation>& history, std::int64_t t,
                             const TextEmbedder& embedder, std::size_t n_authors, int k,
                             std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("coverage needs k >= 1");

    GraphTimeline timeline(log, history);
    const auto& graph = timeline.advance_to(t);
    const SiteInitiationIndex site_inits(log.n_sites(), history);
    const ScoringContext ctx{log, graph, site_inits, embedder, t};

    // Pool of recommendation seekers: authors with an eligible pair who are
    // active at t.
    std::vector<int> pool;
    for (int u = 0; u < log.n_users(); ++u) {
        if (!is_active(log, u, t)) continue;
        if (eligible_source_pairs(log, u, t).empty()) continue;
        pool.push_back(u);
    }
    CoverageReport report;
    report.k = k;
    Rng rng(seed, "coverage-sample");
    rng.shuffle(pool);
    if (pool.size() > n_authors) {
        pool.resize(n_authors);
    } else if (pool.size() < n_authors) {
        report.sample_short = true;
    }
    report.n_sampled = pool.size();
    if (pool.empty()) return report;

    // A site is siloed when every author it had at t has received no
    // initiation strictly before t (initiations add edges toward the target
    // site's authors, so "received" means positive indegree).
    auto is_siloed = [&](int site) {
        for (int a : log.authors_of(site, t)) {
            if (graph.indegree(a) > 0) return false;
        }
        return true;
    };

    std::unordered_set<int> recommended;
    double tenure_sum = 0.0;
    std::size_t tenure_n = 0;
    for (int user : pool) {
        const auto ranked = rank_sites_for_user(model, ctx, user);
        double min_tenure_weeks = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i) {
            recommended.insert(ranked[i].site);
            const std::int64_t first = log.site_first_update_ts(ranked[i].site);
            const double weeks =
                static_cast<double>(t - first) / static_cast<double>(kMsPerWeek);
            if (!any || weeks < min_tenure_weeks) min_tenure_weeks = weeks;
            any = true;
        }
        if (any) {
            tenure_sum += min_tenure_weeks;
            ++tenure_n;
        }
    }

    report.r_size = recommended.size();
    report.pct_unique = static_cast<double>(report.r_size) /
                        (static_cast<double>(report.n_sampled) * static_cast<double>(k));
    report.mmst_weeks = tenure_n == 0 ? 0.0 : tenure_sum / static_cast<double>(tenure_n);

    // Universe of recommendable sites at t: any site with an eligible pair
    // whose author is active, regardless of seeker-specific exclusions.
    std::size_t siloed_recced = 0;
    for (int site : recommended) {
        if (is_siloed(site)) ++siloed_recced;
    }
    std::size_t n_unrecced = 0, siloed_unrecced = 0;
    std::vector<char> author_active(static_cast<std::size_t>(log.n_users()), 2);
    auto active_memo = [&](int a) {
        char& flag = author_active[static_cast<std::size_t>(a)];
        if (flag == 2) flag = is_active(log, a, t) ? 1 : 0;
        return flag == 1;
    };
    for (int site = 0; site < log.n_sites(); ++site) {
        if (recommended.count(site)) continue;
        bool recommendable = false;
        for (int a : log.authors_of(site, t)) {
            if (is_eligible(log, a, site, t) && active_memo(a)) {
                recommendable = true;
                break;
            }
        }
        if (!recommendable) continue;
        ++n_unrecced;
        if (is_siloed(site)) ++siloed_unrecced;
    }

    if (report.r_size > 0) {
        report.siloed_pct_recced =
            static_cast<double>(siloed_recced) / static_cast<double>(report.r_size);
    }
    if (n_unrecced > 0) {
        report.siloed_pct_unrecced =
            static_cast<double>(siloed_unrecced) / static_cast<double>(n_unrecced);
    }
    report.siloed_ratio = report.siloed_pct_unrecced == 0.0
                              ? 0.0
                              : report.siloed_pct_recced / report.siloed_pct_unrecced;
    return report;
}

DriftReport drift_check(const std::vector<RankResult>& results, std::int64_t train_end_ts) {
    std::unordered_map<int, std::pair<double, std::size_t>> buckets; // week -> (sum RR, n)
    for (const auto& r : results) {
        const auto week = static_cast<int>((r.ts - train_end_ts) / kMsPerWeek);
        auto& b = buckets[week];
        b.first += 1.0 / static_cast<double>(r.rank);
        b.second += 1;
    }
    if (buckets.size() < 3) {
        throw std::invalid_argument("drift check needs at least three weekly buckets, got " +
                                    std::to_string(buckets.size()));
    }
    DriftReport report;
    for (const auto& [week, agg] : buckets) report.weeks.push_back(week);
    std::sort(report.weeks.begin(), report.weeks.end());
    std::vector<double> x, y;
    for (int week : report.weeks) {
        const auto& [sum, n] = buckets[week];
        report.weekly_mrr.push_back(sum / static_cast<double>(n));
        report.weekly_n.push_back(n);
        x.push_back(static_cast<double>(week));
        y.push_back(report.weekly_mrr.back());
    }
    report.n_weeks = static_cast<int>(report.weeks.size());
    const auto fit = stats::ols_slope(x, y);
    report.slope = fit.slope;
    report.p_value = fit.p;
    return report;
}

} // namespace rec
