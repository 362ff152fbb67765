#include "recengine/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "recengine/rng.hpp"

namespace rec {

namespace {

std::string padded_id(char prefix, int i) {
    std::ostringstream os;
    os << prefix;
    std::string digits = std::to_string(i);
    for (std::size_t k = digits.size(); k < 5; ++k) os << '0';
    os << digits;
    return os.str();
}

struct Slot {
    std::int64_t ts;
    int actor;
    EventKind kind;
    int fixed_site; // -1 when the target is picked at assignment time
    int seq;
};

std::uint64_t pair_key(int u, int s) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(s);
}

} // namespace

EventLog generate_synthetic_log(const SyntheticConfig& cfg) {
    if (cfg.n_authors < 1 || cfg.n_sites < 1 || cfg.horizon_days < 1) {
        throw std::runtime_error("synthetic config needs at least one author, site, and day");
    }
    if (cfg.homophily < 0.0 || cfg.homophily > 1.0) {
        throw std::runtime_error("homophily must lie in [0, 1]");
    }
    if (cfg.popularity_skew < 0.0) {
        throw std::runtime_error("popularity_skew must be >= 0");
    }

    const int na = cfg.n_authors;
    const int ns = cfg.n_sites;
    const double rates[kEventKindCount] = {cfg.rate_journal, cfg.rate_reaction, cfg.rate_comment,
                                           cfg.rate_guestbook, cfg.rate_visit, cfg.rate_follow};

    // Static assignments: owners, co-authors, topics, popularity order.
    std::vector<int> owner(ns);
    std::vector<int> coauthor(ns, -1);
    std::vector<std::int64_t> creation_ts(ns);
    std::vector<int> topic(na);
    for (int a = 0; a < na; ++a) {
        topic[a] = static_cast<int>(Rng(cfg.seed, "topic", a).next_below(
            static_cast<std::uint64_t>(std::max(1, cfg.n_topics))));
    }
    // Popularity rank is a seeded permutation so it is uncorrelated with
    // creation order; weight falls off harmonically with rank.
    std::vector<int> pop_rank(ns);
    for (int s = 0; s < ns; ++s) pop_rank[s] = s;
    {
        Rng r(cfg.seed, "popularity");
        r.shuffle(pop_rank);
    }
    std::vector<double> pop_weight(ns);
    for (int s = 0; s < ns; ++s) pop_weight[s] = 1.0 / (1.0 + pop_rank[s]);

    const int creation_span_days = std::max(1, static_cast<int>(cfg.horizon_days * 0.3));
    std::vector<std::vector<int>> postable(na); // sites an author may publish on
    for (int s = 0; s < ns; ++s) {
        owner[s] = s % na;
        Rng r(cfg.seed, "site", s);
        const int day = static_cast<int>(r.next_below(static_cast<std::uint64_t>(creation_span_days)));
        creation_ts[s] = cfg.start_ts + day * kMsPerDay +
                         static_cast<std::int64_t>(r.next_below(kMsPerDay));
        if (na > 1 && r.next_double() < cfg.coauthor_prob) {
            coauthor[s] = (owner[s] + 1 + static_cast<int>(r.next_below(static_cast<std::uint64_t>(na - 1)))) % na;
        }
        postable[owner[s]].push_back(s);
        if (coauthor[s] >= 0) postable[coauthor[s]].push_back(s);
    }

    // Phase 1: schedule event slots per author and day. Targets for
    // non-journal events are deferred to phase 2 so they can be assigned in
    // global time order.
    std::vector<Slot> slots;
    int seq = 0;
    for (int s = 0; s < ns; ++s) {
        slots.push_back(Slot{creation_ts[s], owner[s], EventKind::journal_update, s, seq++});
        if (coauthor[s] >= 0) {
            Rng r(cfg.seed, "coauthor_first", s);
            const std::int64_t ts = creation_ts[s] + kMsPerDay +
                                    static_cast<std::int64_t>(r.next_below(4 * kMsPerDay));
            slots.push_back(Slot{ts, coauthor[s], EventKind::journal_update, s, seq++});
        }
    }
    std::vector<int> join_day(na, cfg.horizon_days);
    for (int s = 0; s < ns; ++s) {
        const int day = static_cast<int>((creation_ts[s] - cfg.start_ts) / kMsPerDay);
        join_day[owner[s]] = std::min(join_day[owner[s]], day);
        if (coauthor[s] >= 0) join_day[coauthor[s]] = std::min(join_day[coauthor[s]], day);
    }
    for (int a = 0; a < na; ++a) {
        if (join_day[a] >= cfg.horizon_days) {
            join_day[a] = static_cast<int>(Rng(cfg.seed, "join", a)
                                               .next_below(static_cast<std::uint64_t>(creation_span_days)));
        }
    }
    for (int a = 0; a < na; ++a) {
        for (int d = join_day[a]; d < cfg.horizon_days; ++d) {
            Rng r(cfg.seed, "day", a, d);
            for (int k = 0; k < kEventKindCount; ++k) {
                const int n = r.poisson(rates[k]);
                for (int i = 0; i < n; ++i) {
                    const std::int64_t ts = cfg.start_ts + d * kMsPerDay +
                                            static_cast<std::int64_t>(r.next_below(kMsPerDay));
                    slots.push_back(Slot{ts, a, static_cast<EventKind>(k), -1, seq++});
                }
            }
        }
    }
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
        return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
    });

    // Phase 2: walk slots in time order, maintaining exactly the state a
    // reader of the finished log could reconstruct, and assign targets.
    std::vector<std::int64_t> first_update(ns, kNever);
    std::unordered_map<std::uint64_t, std::int64_t> pair_first_update;
    std::vector<std::vector<int>> site_authors(ns);
    std::vector<std::unordered_set<int>> received_from(na); // users who interacted with my sites
    std::vector<int> created_sites; // in first-update order
    std::vector<EventRecord> records;
    records.reserve(slots.size());
    std::vector<double> weights;
    weights.reserve(ns);
    std::vector<int> valid;
    valid.reserve(ns);
    int content_counter = 0;

    for (const Slot& slot : slots) {
        const int a = slot.actor;
        EventRecord rec;
        rec.ts = slot.ts;
        rec.kind = slot.kind;
        rec.actor = padded_id('u', a);
        Rng pick(cfg.seed, "pick", slot.seq);
        int target = -1;
        if (slot.kind == EventKind::journal_update) {
            if (slot.fixed_site >= 0) {
                target = slot.fixed_site;
            } else {
                std::vector<int> open;
                for (int s : postable[a]) {
                    if (creation_ts[s] <= slot.ts) open.push_back(s);
                }
                if (open.empty()) continue;
                target = open[pick.next_below(open.size())];
            }
        } else {
            valid.clear();
            weights.clear();
            double total = 0.0;
            for (int s : created_sites) {
                if (first_update[s] >= slot.ts) continue;
                auto it = pair_first_update.find(pair_key(a, s));
                if (it != pair_first_update.end() && it->second < slot.ts) continue;
                double w = cfg.popularity_skew > 0.0 ? std::pow(pop_weight[s], cfg.popularity_skew) : 1.0;
                if (cfg.homophily > 0.0) {
                    double boost = 0.0;
                    if (topic[owner[s]] == topic[a]) boost += 4.0;
                    for (int b : site_authors[s]) {
                        if (received_from[a].count(b)) {
                            boost += 6.0;
                            break;
                        }
                    }
                    w *= 1.0 + cfg.homophily * boost;
                }
                valid.push_back(s);
                total += w;
                weights.push_back(total);
            }
            if (valid.empty()) continue;
            const double u = pick.next_double() * total;
            auto it = std::upper_bound(weights.begin(), weights.end(), u);
            std::size_t idx = static_cast<std::size_t>(it - weights.begin());
            if (idx >= valid.size()) idx = valid.size() - 1;
            target = valid[idx];
        }

        rec.site = padded_id('s', target);
        if (slot.kind == EventKind::journal_update) {
            rec.content_ref = "c" + std::to_string(content_counter++);
            Rng text_rng(cfg.seed, "text", slot.seq);
            std::ostringstream text;
            const int n_tokens = 8 + static_cast<int>(text_rng.next_below(18));
            for (int i = 0; i < n_tokens; ++i) {
                if (i > 0) text << ' ';
                if (text_rng.next_double() < 0.75) {
                    text << 't' << topic[a] << 'w' << text_rng.next_below(40);
                } else {
                    text << "cw" << text_rng.next_below(60);
                }
            }
            rec.text = text.str();
            if (first_update[target] == kNever) {
                first_update[target] = slot.ts;
                created_sites.push_back(target);
            }
            pair_first_update.try_emplace(pair_key(a, target), slot.ts);
            auto& authors = site_authors[target];
            if (std::find(authors.begin(), authors.end(), a) == authors.end()) authors.push_back(a);
        } else if (is_interaction_kind(slot.kind)) {
            for (int b : site_authors[target]) received_from[b].insert(a);
        }
        records.push_back(std::move(rec));
    }

    // Records were produced in (ts, seq) order already.
    return EventLog(std::move(records));
}

} // namespace rec
