#include "recengine/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "recengine/rng.hpp"
#include "recengine/stats.hpp"

namespace rec {

namespace {

const std::string kScorerNames[] = {
    "mlp",           "people_you_know", "cos_sim",         "matrix_factorization",
    "most_inits",    "recent_inits",    "most_journals",   "recent_journals",
    "newest_author", "most_interactive", "random",
};

double hours_between(std::int64_t from, std::int64_t to) {
    return static_cast<double>(to - from) / static_cast<double>(kMsPerHour);
}

} // namespace

const std::string& scorer_kind_name(ScorerKind k) { return kScorerNames[static_cast<int>(k)]; }

std::optional<ScorerKind> scorer_kind_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(ScorerKind::random_scorer); ++i) {
        if (kScorerNames[i] == name) return static_cast<ScorerKind>(i);
    }
    return std::nullopt;
}

namespace {

int lookup_row(const std::vector<std::string>& ids,
               std::unordered_map<std::string, int>& index, const std::string& name) {
    if (index.size() != ids.size()) {
        index.clear();
        index.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], static_cast<int>(i) + 1);
    }
    auto it = index.find(name);
    return it == index.end() ? 0 : it->second;
}

} // namespace

int MfParams::author_row(const std::string& name) const {
    return lookup_row(author_ids, author_lookup_, name);
}

int MfParams::site_row(const std::string& name) const {
    return lookup_row(site_ids, site_lookup_, name);
}

namespace {

double score_mlp(const ScorerModel& m, PairRef source, PairRef candidate,
                 const ScoringContext& ctx) {
    if (m.stats.empty()) {
        throw std::runtime_error("mlp model has no standardization statistics; was it trained?");
    }
    thread_local std::vector<double> buf;
    buf.resize(static_cast<std::size_t>(m.features.feature_length()));
    assemble_features(ctx.log, ctx.graph, ctx.embedder, m.features, source, candidate, ctx.t,
                      buf.data());
    m.stats.apply(buf.data());
    return mlp_forward(m.mlp_params, buf.data());
}

double score_people_you_know(PairRef source, PairRef candidate, const ScoringContext& ctx) {
    const auto d = dyadic_features(ctx.graph, source.author, candidate.author);
    if (d.prior_reciprocal > 0.0) return 3.0;
    if (d.friend_of_friend > 0.0) return 2.0;
    if (d.weakly_connected > 0.0) return 1.0;
    return 0.0;
}

double score_cos_sim(const ScorerModel& m, PairRef source, PairRef candidate,
                     const ScoringContext& ctx) {
    const std::size_t half = static_cast<std::size_t>(m.features.pair_block_length());
    thread_local std::vector<double> a, b;
    a.resize(half);
    b.resize(half);
    pair_feature_block(ctx.log, ctx.graph, ctx.embedder, m.features, source, ctx.t, a.data());
    pair_feature_block(ctx.log, ctx.graph, ctx.embedder, m.features, candidate, ctx.t, b.data());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

double score_mf(const ScorerModel& m, PairRef source, PairRef candidate,
                const ScoringContext& ctx) {
    const auto& p = m.mf_params;
    const int ar = p.author_row(ctx.log.user_name(source.author));
    const int sr = p.site_row(ctx.log.site_name(candidate.site));
    const double* ae = p.author_emb.data() + static_cast<std::size_t>(ar) * p.dim;
    const double* se = p.site_emb.data() + static_cast<std::size_t>(sr) * p.dim;
    double dot = 0.0;
    for (int i = 0; i < p.dim; ++i) dot += ae[i] * se[i];
    return dot;
}

} // namespace

double score_pair(const ScorerModel& model, PairRef source, PairRef candidate,
                  const ScoringContext& ctx) {
    switch (model.kind) {
        case ScorerKind::mlp:
            return score_mlp(model, source, candidate, ctx);
        case ScorerKind::people_you_know:
            return score_people_you_know(source, candidate, ctx);
        case ScorerKind::cos_sim:
            return score_cos_sim(model, source, candidate, ctx);
        case ScorerKind::matrix_factorization:
            return score_mf(model, source, candidate, ctx);
        case ScorerKind::most_inits:
            return static_cast<double>(
                ctx.site_inits.count_window(candidate.site, ctx.t - kMsPerWeek, ctx.t));
        case ScorerKind::recent_inits: {
            const std::int64_t last = ctx.site_inits.last_before(candidate.site, ctx.t);
            if (last == kNever) return -1e18;
            return -hours_between(last, ctx.t);
        }
        case ScorerKind::most_journals:
            return static_cast<double>(
                ctx.log.site_update_count_window(candidate.site, ctx.t - kMsPerWeek, ctx.t));
        case ScorerKind::recent_journals: {
            const std::int64_t last = ctx.log.site_last_update_before(candidate.site, ctx.t);
            if (last == kNever) return -1e18;
            return -hours_between(last, ctx.t);
        }
        case ScorerKind::newest_author: {
            const std::int64_t first = ctx.log.site_first_update_ts(candidate.site);
            if (first == kNever) return -1e18;
            return -hours_between(first, ctx.t);
        }
        case ScorerKind::most_interactive: {
            int count = 0;
            for (int author : ctx.log.authors_of(candidate.site, ctx.t)) {
                count += ctx.log.count_in_window(author, EventKind::reaction, ctx.t - kMsPerWeek, ctx.t);
                count += ctx.log.count_in_window(author, EventKind::comment, ctx.t - kMsPerWeek, ctx.t);
                count +=
                    ctx.log.count_in_window(author, EventKind::guestbook, ctx.t - kMsPerWeek, ctx.t);
            }
            return static_cast<double>(count);
        }
        case ScorerKind::random_scorer: {
            const std::uint64_t h =
                keyed_hash(model.seed, "random", ctx.log.user_name(source.author),
                           ctx.log.site_name(source.site), ctx.log.user_name(candidate.author),
                           ctx.log.site_name(candidate.site), ctx.t);
            return static_cast<double>(h >> 11) * 0x1.0p-53;
        }
    }
    throw std::runtime_error("unknown scorer kind");
}

FeatureMatrix build_feature_matrix(const EventLog& log, const std::vector<Initiation>& initiations,
                                   const std::vector<TrainingSample>& samples,
                                   const TextEmbedder& embedder, const FeatureConfig& fcfg) {
    FeatureMatrix m;
    m.dim = fcfg.feature_length();
    m.n = samples.size();
    m.rows.resize(m.n * static_cast<std::size_t>(m.dim));
    m.labels.reserve(m.n);
    m.groups.reserve(m.n);
    GraphTimeline timeline(log, initiations);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (i > 0 && s.ts < samples[i - 1].ts) {
            throw std::runtime_error("training samples must be in nondecreasing ts order");
        }
        const auto& graph = timeline.advance_to(s.ts);
        assemble_features(log, graph, embedder, fcfg, s.source, s.candidate, s.ts,
                          m.rows.data() + i * static_cast<std::size_t>(m.dim));
        m.labels.push_back(s.label);
        m.groups.push_back(s.initiation_index);
    }
    return m;
}

ScorerModel train_mlp_model(const EventLog& log, const std::vector<Initiation>& initiations,
                            const std::vector<TrainingSample>& samples,
                            const TextEmbedder& embedder, const FeatureConfig& fcfg,
                            const MlpConfig& cfg, TrainingTrace* trace_out) {
    if (samples.empty()) throw std::runtime_error("cannot train mlp on zero samples");
    FeatureMatrix m = build_feature_matrix(log, initiations, samples, embedder, fcfg);
    ScorerModel model;
    model.kind = ScorerKind::mlp;
    model.features = fcfg;
    model.embedder = embedder.spec();
    model.seed = cfg.seed;
    model.mlp_cfg = cfg;
    model.stats = fit_standardizer(m.rows, m.n, fcfg);
    for (std::size_t r = 0; r < m.n; ++r) {
        model.stats.apply(m.rows.data() + r * static_cast<std::size_t>(m.dim));
    }
    auto result = train_mlp_matrix(m.rows, m.n, m.dim, m.labels, m.groups, cfg);
    model.mlp_params = std::move(result.params);
    model.meta.seed = cfg.seed;
    model.meta.epochs = cfg.epochs;
    model.meta.best_epoch = result.trace.best_epoch;
    model.meta.best_holdout_loss =
        result.trace.holdout_loss[static_cast<std::size_t>(result.trace.best_epoch)];
    model.meta.n_train_rows = result.trace.n_train_rows;
    model.meta.n_holdout_rows = result.trace.n_holdout_rows;
    if (trace_out) *trace_out = std::move(result.trace);
    return model;
}

ScorerModel train_mf_model(const EventLog& log, const std::vector<Initiation>& initiations,
                           const std::vector<TrainingSample>& samples, const FeatureConfig& fcfg,
                           const EmbedderSpec& espec, const MfConfig& cfg) {
    if (samples.empty()) throw std::runtime_error("cannot train mf on zero samples");
    // Ids seen at least min_occurrences times across the training initiations
    // get their own rows; everything else shares row 0.
    std::unordered_map<int, int> author_count, site_count;
    for (const auto& init : initiations) {
        ++author_count[init.source];
        ++site_count[init.target_site];
    }
    MfParams p;
    p.dim = cfg.dim;
    std::unordered_map<int, int> author_row, site_row;
    for (const auto& init : initiations) {
        if (author_count[init.source] >= cfg.min_occurrences && !author_row.count(init.source)) {
            author_row[init.source] = static_cast<int>(p.author_ids.size()) + 1;
            p.author_ids.push_back(log.user_name(init.source));
        }
        if (site_count[init.target_site] >= cfg.min_occurrences &&
            !site_row.count(init.target_site)) {
            site_row[init.target_site] = static_cast<int>(p.site_ids.size()) + 1;
            p.site_ids.push_back(log.site_name(init.target_site));
        }
    }
    const std::size_t na = p.author_ids.size() + 1;
    const std::size_t ns = p.site_ids.size() + 1;
    const std::size_t d = static_cast<std::size_t>(cfg.dim);
    p.author_emb.resize(na * d);
    p.site_emb.resize(ns * d);
    {
        Rng init_rng(cfg.seed, "mf_init");
        for (auto& x : p.author_emb) x = init_rng.uniform(-0.05, 0.05);
        for (auto& x : p.site_emb) x = init_rng.uniform(-0.05, 0.05);
    }

    // Row pairs to train on.
    std::vector<int> ra(samples.size()), rs(samples.size());
    std::vector<int> label(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto ita = author_row.find(samples[i].source.author);
        ra[i] = ita == author_row.end() ? 0 : ita->second;
        auto its = site_row.find(samples[i].candidate.site);
        rs[i] = its == site_row.end() ? 0 : its->second;
        label[i] = samples[i].label;
    }

    const std::size_t n = samples.size();
    const std::size_t batch =
        cfg.batch_size <= 0 ? n : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    const std::size_t batches_per_epoch = (n + batch - 1) / batch;
    const auto lr_sched =
        one_cycle_schedule(cfg.max_lr, cfg.epochs * static_cast<int>(batches_per_epoch));

    std::vector<double> ma(p.author_emb.size(), 0.0), va(p.author_emb.size(), 0.0);
    std::vector<double> ms(p.site_emb.size(), 0.0), vs(p.site_emb.size(), 0.0);
    std::vector<double> ga(p.author_emb.size(), 0.0), gs(p.site_emb.size(), 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batches_per_epoch > 1) {
            Rng r(cfg.seed, "mf_order", epoch);
            r.shuffle(order);
        }
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t lo = b * batch;
            const std::size_t hi = std::min(lo + batch, n);
            std::fill(ga.begin(), ga.end(), 0.0);
            std::fill(gs.begin(), gs.end(), 0.0);
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t i = order[k];
                double* ae = p.author_emb.data() + static_cast<std::size_t>(ra[i]) * d;
                double* se = p.site_emb.data() + static_cast<std::size_t>(rs[i]) * d;
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += ae[j] * se[j];
                const double dz = (1.0 / (1.0 + std::exp(-dot)) - label[i]) /
                                  static_cast<double>(hi - lo);
                double* gae = ga.data() + static_cast<std::size_t>(ra[i]) * d;
                double* gse = gs.data() + static_cast<std::size_t>(rs[i]) * d;
                for (std::size_t j = 0; j < d; ++j) {
                    gae[j] += dz * se[j];
                    gse[j] += dz * ae[j];
                }
            }
            const double lr = lr_sched[static_cast<std::size_t>(step)];
            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, step);
            const double bc2 = 1.0 - std::pow(kBeta2, step);
            auto adam = [&](std::vector<double>& w, std::vector<double>& g, std::vector<double>& mm,
                            std::vector<double>& vv) {
                for (std::size_t i = 0; i < w.size(); ++i) {
                    double gi = g[i] + cfg.weight_decay * w[i];
                    mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * gi;
                    vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * gi * gi;
                    w[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + kEps);
                }
            };
            adam(p.author_emb, ga, ma, va);
            adam(p.site_emb, gs, ms, vs);
        }
    }

    ScorerModel model;
    model.kind = ScorerKind::matrix_factorization;
    model.features = fcfg;
    model.embedder = espec;
    model.seed = cfg.seed;
    model.mf_params = std::move(p);
    model.mf_cfg = cfg;
    model.meta.seed = cfg.seed;
    model.meta.epochs = cfg.epochs;
    return model;
}

ScorerModel make_baseline(ScorerKind kind, const FeatureConfig& fcfg, const EmbedderSpec& espec,
                          std::uint64_t seed) {
    if (kind == ScorerKind::mlp || kind == ScorerKind::matrix_factorization) {
        throw std::runtime_error("trained scorer kinds need training, not make_baseline");
    }
    ScorerModel m;
    m.kind = kind;
    m.features = fcfg;
    m.embedder = espec;
    m.seed = seed;
    return m;
}

HyperResult hyperparameter_search(const HyperGrid& grid, const MlpConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::function<double(const MlpConfig&)>& evaluate) {
    if (seeds.empty()) throw std::runtime_error("hyperparameter_search needs at least one seed");
    HyperResult res;
    bool first = true;
    for (int h : grid.hidden_units) {
        for (double dr : grid.dropout) {
            for (double wd : grid.weight_decay) {
                for (double lr : grid.max_lr) {
                    HyperTrial trial;
                    trial.cfg = base;
                    trial.cfg.hidden_units = h;
                    trial.cfg.dropout = dr;
                    trial.cfg.weight_decay = wd;
                    trial.cfg.max_lr = lr;
                    for (std::uint64_t s : seeds) {
                        MlpConfig c = trial.cfg;
                        c.seed = s;
                        trial.seed_scores.push_back(evaluate(c));
                    }
                    trial.median_score = stats::median(trial.seed_scores);
                    const bool better =
                        first || trial.median_score > res.best_median ||
                        (trial.median_score == res.best_median &&
                         (trial.cfg.hidden_units < res.best.hidden_units ||
                          (trial.cfg.hidden_units == res.best.hidden_units &&
                           trial.cfg.dropout < res.best.dropout)));
                    if (better) {
                        res.best = trial.cfg;
                        res.best_median = trial.median_score;
                        first = false;
                    }
                    res.trials.push_back(std::move(trial));
                }
            }
        }
    }
    return res;
}

} // namespace rec
