#include "recengine/feedback.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "recengine/rng.hpp"

namespace rec {

std::vector<Initiation> extract_initiations(const EventLog& log) {
    std::vector<Initiation> out;
    std::unordered_set<std::uint64_t> seen; // (user, site) pairs that have interacted
    const auto& records = log.records();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!is_interaction_kind(r.kind)) continue;
        const int u = log.actor_of(i);
        const int s = log.site_of(i);
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
            static_cast<std::uint32_t>(s);
        if (!seen.insert(key).second) continue; // not the first contact with this site
        if (log.first_update_ts(u) >= r.ts) continue; // not yet an author anywhere
        if (log.is_author(u, s, r.ts)) continue;      // own site
        out.push_back(Initiation{u, s, r.ts, i});
    }
    return out;
}

bool is_eligible(const EventLog& log, int author, int site, std::int64_t t) {
    return log.update_count(author, site, t) >= 3;
}

std::vector<PairRef> eligible_source_pairs(const EventLog& log, int user, std::int64_t t) {
    std::vector<PairRef> pairs;
    for (int s : log.sites_updated_by(user)) {
        if (is_eligible(log, user, s, t)) pairs.push_back(PairRef{user, s});
    }
    return pairs;
}

bool is_active(const EventLog& log, int author, std::int64_t t) {
    const std::int64_t lo = t - kMsPerWeek;
    for (int k = 0; k < kEventKindCount; ++k) {
        const auto kind = static_cast<EventKind>(k);
        if (!is_activity_kind(kind)) continue;
        if (log.count_in_window(author, kind, lo, t) > 0) return true;
    }
    return false;
}

std::vector<PairRef> candidate_pairs(const EventLog& log, int source, std::int64_t t) {
    std::vector<PairRef> out;
    std::vector<char> author_active(static_cast<std::size_t>(log.n_users()), 2); // 2 = unknown
    for (const auto& [author, site] : log.author_site_pairs()) {
        if (author == source) continue;
        if (!is_eligible(log, author, site, t)) continue;
        auto& flag = author_active[static_cast<std::size_t>(author)];
        if (flag == 2) flag = is_active(log, author, t) ? 1 : 0;
        if (flag == 0) continue;
        if (log.is_author(source, site, t)) continue;
        if (log.first_interaction_ts(source, site) < t) continue;
        out.push_back(PairRef{author, site});
    }
    return out;
}

InteractionGraph::InteractionGraph(int n_users)
    : parent_(static_cast<std::size_t>(n_users)),
      comp_size_(static_cast<std::size_t>(n_users), 1),
      indeg_(static_cast<std::size_t>(n_users), 0),
      outdeg_(static_cast<std::size_t>(n_users), 0),
      adj_(static_cast<std::size_t>(n_users)),
      out_(static_cast<std::size_t>(n_users)) {
    for (std::size_t i = 0; i < parent_.size(); ++i) parent_[i] = static_cast<int>(i);
}

int InteractionGraph::find(int x) const {
    while (parent_[static_cast<std::size_t>(x)] != x) {
        parent_[static_cast<std::size_t>(x)] =
            parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
        x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
}

void InteractionGraph::add_edge(int from, int to) {
    ++indeg_[static_cast<std::size_t>(to)];
    ++outdeg_[static_cast<std::size_t>(from)];
    ++n_edges_;
    adj_[static_cast<std::size_t>(from)].insert(to);
    adj_[static_cast<std::size_t>(to)].insert(from);
    out_[static_cast<std::size_t>(from)].insert(to);
    int ra = find(from), rb = find(to);
    if (ra != rb) {
        if (comp_size_[static_cast<std::size_t>(ra)] < comp_size_[static_cast<std::size_t>(rb)]) {
            std::swap(ra, rb);
        }
        parent_[static_cast<std::size_t>(rb)] = ra;
        comp_size_[static_cast<std::size_t>(ra)] += comp_size_[static_cast<std::size_t>(rb)];
    }
}

void InteractionGraph::add_initiation(const EventLog& log, const Initiation& init) {
    for (int author : log.authors_of(init.target_site, init.ts)) {
        add_edge(init.source, author);
    }
}

int InteractionGraph::component_size(int u) const {
    return comp_size_[static_cast<std::size_t>(find(u))];
}

bool InteractionGraph::same_component(int a, int b) const { return find(a) == find(b); }

bool InteractionGraph::has_edge(int from, int to) const {
    return out_[static_cast<std::size_t>(from)].count(to) > 0;
}

bool InteractionGraph::friend_of_friend(int a, int b) const {
    const auto& na = adj_[static_cast<std::size_t>(a)];
    const auto& nb = adj_[static_cast<std::size_t>(b)];
    const auto& small = na.size() <= nb.size() ? na : nb;
    const auto& large = na.size() <= nb.size() ? nb : na;
    for (int c : small) {
        if (c == a || c == b) continue;
        if (large.count(c)) return true;
    }
    return false;
}

DyadicFeatures dyadic_features(const InteractionGraph& g, int source_author, int candidate_author) {
    DyadicFeatures d;
    d.weakly_connected =
        g.same_component(source_author, candidate_author) && source_author != candidate_author
            ? 1.0
            : 0.0;
    d.friend_of_friend = g.friend_of_friend(source_author, candidate_author) ? 1.0 : 0.0;
    d.prior_reciprocal = g.has_edge(candidate_author, source_author) ? 1.0 : 0.0;
    return d;
}

GraphTimeline::GraphTimeline(const EventLog& log, std::vector<Initiation> initiations)
    : log_(&log), initiations_(std::move(initiations)), graph_(log.n_users()) {
    for (std::size_t i = 1; i < initiations_.size(); ++i) {
        if (initiations_[i].ts < initiations_[i - 1].ts) {
            throw std::runtime_error("initiations must be sorted by timestamp");
        }
    }
}

const InteractionGraph& GraphTimeline::advance_to(std::int64_t t) {
    if (t < last_t_) throw std::runtime_error("graph timeline cannot move backwards");
    last_t_ = t;
    while (cursor_ < initiations_.size() && initiations_[cursor_].ts < t) {
        graph_.add_initiation(*log_, initiations_[cursor_]);
        ++cursor_;
    }
    return graph_;
}

SiteInitiationIndex::SiteInitiationIndex(int n_sites, const std::vector<Initiation>& initiations)
    : by_site_(static_cast<std::size_t>(n_sites)) {
    for (const auto& init : initiations) {
        by_site_[static_cast<std::size_t>(init.target_site)].push_back(init.ts);
    }
    for (auto& v : by_site_) std::sort(v.begin(), v.end());
}

int SiteInitiationIndex::count_window(int site, std::int64_t lo, std::int64_t hi) const {
    const auto& v = by_site_[static_cast<std::size_t>(site)];
    auto a = std::upper_bound(v.begin(), v.end(), lo);
    auto b = std::lower_bound(v.begin(), v.end(), hi);
    return b > a ? static_cast<int>(b - a) : 0;
}

std::int64_t SiteInitiationIndex::last_before(int site, std::int64_t t) const {
    const auto& v = by_site_[static_cast<std::size_t>(site)];
    auto it = std::lower_bound(v.begin(), v.end(), t);
    if (it == v.begin()) return kNever;
    return *(it - 1);
}

TrainingSampleSet build_training_samples(const EventLog& log,
                                         const std::vector<Initiation>& initiations,
                                         std::uint64_t seed) {
    TrainingSampleSet set;
    set.seed = seed;
    for (std::size_t idx = 0; idx < initiations.size(); ++idx) {
        const auto& init = initiations[idx];
        ++set.n_initiations;
        const std::int64_t t = init.ts;

        std::vector<PairRef> source_pairs = eligible_source_pairs(log, init.source, t);
        if (source_pairs.empty()) {
            ++set.n_skipped_no_source_pair;
            continue;
        }
        std::vector<PairRef> target_pairs;
        for (int a : log.authors_of(init.target_site, t)) {
            if (is_eligible(log, a, init.target_site, t)) {
                target_pairs.push_back(PairRef{a, init.target_site});
            }
        }
        if (target_pairs.empty()) {
            ++set.n_skipped_no_target_pair;
            continue;
        }

        const auto candidates = candidate_pairs(log, init.source, t);
        Rng rng(seed, "negative", static_cast<std::uint64_t>(idx));
        for (const auto& sp : source_pairs) {
            for (const auto& tp : target_pairs) {
                set.samples.push_back(
                    TrainingSample{sp, tp, 1, t, static_cast<int>(idx)});
                if (candidates.empty()) {
                    ++set.n_without_negative;
                } else {
                    const auto& neg = candidates[rng.next_below(candidates.size())];
                    set.samples.push_back(
                        TrainingSample{sp, neg, 0, t, static_cast<int>(idx)});
                }
            }
        }
    }
    return set;
}

void write_training_samples_file(const TrainingSampleSet& set, const EventLog& log,
                                 const std::string& path, const std::string& log_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write training samples: " + path);
    nlohmann::json header = {
        {"type", "header"},
        {"version", 1},
        {"seed", set.seed},
        {"log_hash", log_hash},
        {"n_initiations", set.n_initiations},
        {"n_skipped_no_source_pair", set.n_skipped_no_source_pair},
        {"n_skipped_no_target_pair", set.n_skipped_no_target_pair},
        {"n_without_negative", set.n_without_negative},
        {"n_samples", set.samples.size()},
    };
    out << header.dump() << "\n";
    for (const auto& s : set.samples) {
        nlohmann::json row = {
            {"src_author", log.user_name(s.source.author)},
            {"src_site", log.site_name(s.source.site)},
            {"cand_author", log.user_name(s.candidate.author)},
            {"cand_site", log.site_name(s.candidate.site)},
            {"label", s.label},
            {"ts", s.ts},
            {"initiation", s.initiation_index},
        };
        out << row.dump() << "\n";
    }
}

TrainingSampleSet read_training_samples_file(const std::string& path, const EventLog& log,
                                             std::string* log_hash_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open training samples: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("training sample file is empty: " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header") {
        throw std::runtime_error("training sample file missing header line: " + path);
    }
    TrainingSampleSet set;
    set.seed = header.value("seed", 0ULL);
    set.n_initiations = header.value("n_initiations", 0);
    set.n_skipped_no_source_pair = header.value("n_skipped_no_source_pair", 0);
    set.n_skipped_no_target_pair = header.value("n_skipped_no_target_pair", 0);
    set.n_without_negative = header.value("n_without_negative", 0);
    if (log_hash_out) *log_hash_out = header.value("log_hash", "");
    std::size_t line_no = 1;
    auto need_user = [&](const std::string& name) {
        const int u = log.user_index(name);
        if (u < 0) {
            throw std::runtime_error("training sample line " + std::to_string(line_no) +
                                     ": unknown user '" + name + "'");
        }
        return u;
    };
    auto need_site = [&](const std::string& name) {
        const int s = log.site_index(name);
        if (s < 0) {
            throw std::runtime_error("training sample line " + std::to_string(line_no) +
                                     ": unknown site '" + name + "'");
        }
        return s;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        TrainingSample s;
        s.source.author = need_user(j.at("src_author").get<std::string>());
        s.source.site = need_site(j.at("src_site").get<std::string>());
        s.candidate.author = need_user(j.at("cand_author").get<std::string>());
        s.candidate.site = need_site(j.at("cand_site").get<std::string>());
        s.label = j.at("label").get<int>();
        s.ts = j.at("ts").get<std::int64_t>();
        s.initiation_index = j.at("initiation").get<int>();
        set.samples.push_back(s);
    }
    return set;
}

} // namespace rec
