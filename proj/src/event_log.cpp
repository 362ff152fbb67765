#include "recengine/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rec {

namespace {

const std::string kKindNames[kEventKindCount] = {
    "journal_update", "reaction", "comment", "guestbook", "visit", "follow",
};

std::uint64_t pair_key(int user, int site) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(user)) << 32) |
           static_cast<std::uint32_t>(site);
}

// Count elements of a sorted vector in the open interval (lo, hi).
int count_open(const std::vector<std::int64_t>& v, std::int64_t lo, std::int64_t hi) {
    auto a = std::upper_bound(v.begin(), v.end(), lo);
    auto b = std::lower_bound(v.begin(), v.end(), hi);
    return b > a ? static_cast<int>(b - a) : 0;
}

std::int64_t last_before(const std::vector<std::int64_t>& v, std::int64_t t) {
    auto it = std::lower_bound(v.begin(), v.end(), t);
    if (it == v.begin()) return kNever;
    return *(it - 1);
}

} // namespace

const std::string& event_kind_name(EventKind k) {
    return kKindNames[static_cast<int>(k)];
}

std::optional<EventKind> event_kind_from_name(const std::string& name) {
    for (int i = 0; i < kEventKindCount; ++i) {
        if (kKindNames[i] == name) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

EventLog::EventLog(std::vector<EventRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 1; i < records_.size(); ++i) {
        if (records_[i].ts < records_[i - 1].ts) ++sort_warnings_;
    }
    if (sort_warnings_ > 0) {
        std::stable_sort(records_.begin(), records_.end(),
                         [](const EventRecord& a, const EventRecord& b) { return a.ts < b.ts; });
    }
    build_indexes();
}

int EventLog::intern_user(const std::string& name) {
    auto [it, inserted] = user_ids_.try_emplace(name, static_cast<int>(user_names_.size()));
    if (inserted) user_names_.push_back(name);
    return it->second;
}

int EventLog::intern_site(const std::string& name) {
    auto [it, inserted] = site_ids_.try_emplace(name, static_cast<int>(site_names_.size()));
    if (inserted) site_names_.push_back(name);
    return it->second;
}

void EventLog::build_indexes() {
    actor_idx_.reserve(records_.size());
    site_idx_.reserve(records_.size());
    for (const auto& r : records_) {
        actor_idx_.push_back(intern_user(r.actor));
        site_idx_.push_back(intern_site(r.site));
    }

    const int nu = n_users();
    const int ns = n_sites();
    site_authorship_.resize(static_cast<std::size_t>(ns));
    user_authorship_.resize(static_cast<std::size_t>(nu));
    user_sites_.resize(static_cast<std::size_t>(nu));
    user_first_update_.assign(static_cast<std::size_t>(nu), kNever);
    user_kind_ts_.assign(static_cast<std::size_t>(nu),
                         std::vector<std::vector<std::int64_t>>(kEventKindCount));
    site_updates_.resize(static_cast<std::size_t>(ns));

    std::unordered_map<std::uint64_t, int> authorship_slot;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        const int u = actor_idx_[i];
        const int s = site_idx_[i];
        user_kind_ts_[u][static_cast<int>(r.kind)].push_back(r.ts);
        if (r.kind == EventKind::journal_update) {
            site_updates_[s].push_back(UpdateRef{r.ts, i});
            if (user_first_update_[u] == kNever) user_first_update_[u] = r.ts;
            auto [it, fresh] = authorship_slot.try_emplace(pair_key(u, s),
                                                           static_cast<int>(authorship_.size()));
            if (fresh) {
                authorship_.push_back(Authorship{u, s, {}});
                author_site_pairs_.emplace_back(u, s);
                site_authorship_[s].push_back(it->second);
                user_authorship_[u].push_back(it->second);
                user_sites_[u].push_back(s);
            }
            authorship_[static_cast<std::size_t>(it->second)].update_ts.push_back(r.ts);
        } else if (is_interaction_kind(r.kind)) {
            first_interaction_.try_emplace(pair_key(u, s), r.ts);
        }
    }
}

int EventLog::user_index(const std::string& name) const {
    auto it = user_ids_.find(name);
    return it == user_ids_.end() ? -1 : it->second;
}

int EventLog::site_index(const std::string& name) const {
    auto it = site_ids_.find(name);
    return it == site_ids_.end() ? -1 : it->second;
}

int EventLog::update_count(int user, int site, std::int64_t t) const {
    for (int slot : user_authorship_[static_cast<std::size_t>(user)]) {
        const auto& a = authorship_[static_cast<std::size_t>(slot)];
        if (a.site == site) {
            auto it = std::lower_bound(a.update_ts.begin(), a.update_ts.end(), t);
            return static_cast<int>(it - a.update_ts.begin());
        }
    }
    return 0;
}

std::vector<int> EventLog::authors_of(int site, std::int64_t t) const {
    std::vector<int> out;
    for (int slot : site_authorship_[static_cast<std::size_t>(site)]) {
        const auto& a = authorship_[static_cast<std::size_t>(slot)];
        if (!a.update_ts.empty() && a.update_ts.front() < t) out.push_back(a.user);
    }
    return out;
}

const std::vector<int>& EventLog::sites_updated_by(int user) const {
    return user_sites_[static_cast<std::size_t>(user)];
}

std::int64_t EventLog::first_update_ts(int user) const {
    return user_first_update_[static_cast<std::size_t>(user)];
}

std::int64_t EventLog::first_update_ts_on(int user, int site) const {
    for (int slot : user_authorship_[static_cast<std::size_t>(user)]) {
        const auto& a = authorship_[static_cast<std::size_t>(slot)];
        if (a.site == site && !a.update_ts.empty()) return a.update_ts.front();
    }
    return kNever;
}

std::int64_t EventLog::site_first_update_ts(int site) const {
    const auto& ups = site_updates_[static_cast<std::size_t>(site)];
    return ups.empty() ? kNever : ups.front().ts;
}

int EventLog::count_in_window(int user, EventKind k, std::int64_t lo, std::int64_t hi) const {
    return count_open(user_kind_ts_[static_cast<std::size_t>(user)][static_cast<int>(k)], lo, hi);
}

std::int64_t EventLog::last_event_before(int user, EventKind k, std::int64_t t) const {
    return last_before(user_kind_ts_[static_cast<std::size_t>(user)][static_cast<int>(k)], t);
}

const std::vector<EventLog::UpdateRef>& EventLog::site_updates(int site) const {
    return site_updates_[static_cast<std::size_t>(site)];
}

int EventLog::site_update_count_window(int site, std::int64_t lo, std::int64_t hi) const {
    const auto& ups = site_updates_[static_cast<std::size_t>(site)];
    auto a = std::upper_bound(ups.begin(), ups.end(), lo,
                              [](std::int64_t v, const UpdateRef& u) { return v < u.ts; });
    auto b = std::lower_bound(ups.begin(), ups.end(), hi,
                              [](const UpdateRef& u, std::int64_t v) { return u.ts < v; });
    return b > a ? static_cast<int>(b - a) : 0;
}

std::int64_t EventLog::site_last_update_before(int site, std::int64_t t) const {
    const auto& ups = site_updates_[static_cast<std::size_t>(site)];
    auto it = std::lower_bound(ups.begin(), ups.end(), t,
                               [](const UpdateRef& u, std::int64_t v) { return u.ts < v; });
    if (it == ups.begin()) return kNever;
    return (it - 1)->ts;
}

std::int64_t EventLog::first_interaction_ts(int user, int site) const {
    auto it = first_interaction_.find(pair_key(user, site));
    return it == first_interaction_.end() ? kNever : it->second;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    std::ostringstream os;
    os << "line " << line_no << ": " << what;
    throw std::runtime_error(os.str());
}

} // namespace

EventLog parse_event_log(std::istream& in) {
    std::vector<EventRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            parse_fail(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) parse_fail(line_no, "expected a JSON object");
        EventRecord r;
        if (!j.contains("ts") || !j["ts"].is_number_integer()) {
            parse_fail(line_no, "missing or non-integer 'ts'");
        }
        r.ts = j["ts"].get<std::int64_t>();
        if (!j.contains("kind") || !j["kind"].is_string()) {
            parse_fail(line_no, "missing or non-string 'kind'");
        }
        const auto kind_name = j["kind"].get<std::string>();
        auto kind = event_kind_from_name(kind_name);
        if (!kind) parse_fail(line_no, "unknown kind '" + kind_name + "'");
        r.kind = *kind;
        for (const char* field : {"actor", "site"}) {
            if (!j.contains(field) || !j[field].is_string() || j[field].get<std::string>().empty()) {
                parse_fail(line_no, std::string("missing or empty '") + field + "'");
            }
        }
        r.actor = j["actor"].get<std::string>();
        r.site = j["site"].get<std::string>();
        if (j.contains("content_ref")) {
            if (!j["content_ref"].is_string()) parse_fail(line_no, "non-string 'content_ref'");
            r.content_ref = j["content_ref"].get<std::string>();
        }
        if (j.contains("text")) {
            if (!j["text"].is_string()) parse_fail(line_no, "non-string 'text'");
            r.text = j["text"].get<std::string>();
        }
        records.push_back(std::move(r));
    }
    return EventLog(std::move(records));
}

EventLog parse_event_log_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open event log: " + path);
    return parse_event_log(in);
}

std::string event_to_json_line(const EventRecord& r) {
    std::ostringstream os;
    os << "{\"ts\":" << r.ts << ",\"kind\":\"" << event_kind_name(r.kind) << "\",\"actor\":"
       << nlohmann::json(r.actor).dump() << ",\"site\":" << nlohmann::json(r.site).dump();
    if (r.content_ref) os << ",\"content_ref\":" << nlohmann::json(*r.content_ref).dump();
    if (r.text) os << ",\"text\":" << nlohmann::json(*r.text).dump();
    os << "}";
    return os.str();
}

void write_event_log(const EventLog& log, std::ostream& out) {
    for (const auto& r : log.records()) {
        out << event_to_json_line(r) << "\n";
    }
}

void write_event_log_file(const EventLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write event log: " + path);
    write_event_log(log, out);
}

} // namespace rec
