#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace rec {

constexpr std::int64_t kMsPerHour = 3600LL * 1000;
constexpr std::int64_t kMsPerDay = 24 * kMsPerHour;
constexpr std::int64_t kMsPerWeek = 7 * kMsPerDay;

// Timestamp sentinel meaning "no such event exists".
constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

enum class EventKind : int {
    journal_update = 0,
    reaction = 1,
    comment = 2,
    guestbook = 3,
    visit = 4,
    follow = 5,
};
constexpr int kEventKindCount = 6;

// The three kinds that count as peer interactions. Visits and follows are
// recorded but never create initiations.
constexpr bool is_interaction_kind(EventKind k) {
    return k == EventKind::reaction || k == EventKind::comment || k == EventKind::guestbook;
}

// Kinds that make an author count as active: publishing plus interacting.
constexpr bool is_activity_kind(EventKind k) {
    return k == EventKind::journal_update || is_interaction_kind(k);
}

const std::string& event_kind_name(EventKind k);
std::optional<EventKind> event_kind_from_name(const std::string& name);

struct EventRecord {
    std::int64_t ts = 0; // milliseconds since epoch
    EventKind kind = EventKind::journal_update;
    std::string actor;
    std::string site;
    std::optional<std::string> content_ref;
    std::optional<std::string> text;

    bool operator==(const EventRecord&) const = default;
};

// Immutable, indexed view over a chronologically sorted list of events.
// All temporal queries take a cutoff t and consider only events with ts
// strictly before t, so "state at t" means the state an observer would see
// the instant the millisecond t begins.
class EventLog {
public:
    EventLog() = default;
    // Sorts by ts if needed (stable, preserving input order among ties) and
    // counts how many records arrived out of order.
    explicit EventLog(std::vector<EventRecord> records);

    const std::vector<EventRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    int sort_warnings() const { return sort_warnings_; }

    // Interned identifiers. Users and sites occupy separate index spaces.
    int n_users() const { return static_cast<int>(user_names_.size()); }
    int n_sites() const { return static_cast<int>(site_names_.size()); }
    int user_index(const std::string& name) const;
    int site_index(const std::string& name) const;
    const std::string& user_name(int u) const { return user_names_[static_cast<std::size_t>(u)]; }
    const std::string& site_name(int s) const { return site_names_[static_cast<std::size_t>(s)]; }
    int actor_of(std::size_t record) const { return actor_idx_[record]; }
    int site_of(std::size_t record) const { return site_idx_[record]; }

    // Authorship: a user authors a site once they have published a journal
    // update on it. Authorship never lapses.
    bool is_author(int user, int site, std::int64_t t) const { return update_count(user, site, t) > 0; }
    int update_count(int user, int site, std::int64_t t) const;
    std::vector<int> authors_of(int site, std::int64_t t) const;
    // Sites the user has ever updated, in order of their first update there.
    const std::vector<int>& sites_updated_by(int user) const;
    // Every (user, site) pair with at least one journal update, in order of
    // first update. The universe that eligibility filters narrow down.
    const std::vector<std::pair<int, int>>& author_site_pairs() const { return author_site_pairs_; }
    std::int64_t first_update_ts(int user) const; // across all sites; kNever if none
    std::int64_t first_update_ts_on(int user, int site) const;
    std::int64_t site_first_update_ts(int site) const;

    // Per-user activity streams, one per event kind, sorted by ts.
    // Window queries are over the open interval (lo, hi).
    int count_in_window(int user, EventKind k, std::int64_t lo, std::int64_t hi) const;
    std::int64_t last_event_before(int user, EventKind k, std::int64_t t) const; // kNever if none

    struct UpdateRef {
        std::int64_t ts;
        std::size_t record;
    };
    // All journal updates on a site, any author, sorted by ts.
    const std::vector<UpdateRef>& site_updates(int site) const;
    int site_update_count_window(int site, std::int64_t lo, std::int64_t hi) const;
    std::int64_t site_last_update_before(int site, std::int64_t t) const;

    // First interaction (reaction/comment/guestbook) by user on site; kNever
    // if they never interacted. Pre-authorship interactions count.
    std::int64_t first_interaction_ts(int user, int site) const;

private:
    void build_indexes();
    int intern_user(const std::string& name);
    int intern_site(const std::string& name);

    std::vector<EventRecord> records_;
    int sort_warnings_ = 0;

    std::vector<std::string> user_names_;
    std::vector<std::string> site_names_;
    std::unordered_map<std::string, int> user_ids_;
    std::unordered_map<std::string, int> site_ids_;
    std::vector<int> actor_idx_;
    std::vector<int> site_idx_;

    struct Authorship {
        int user;
        int site;
        std::vector<std::int64_t> update_ts; // sorted
    };
    std::vector<Authorship> authorship_;
    std::vector<std::pair<int, int>> author_site_pairs_;
    std::vector<std::vector<int>> site_authorship_; // site -> indexes into authorship_
    std::vector<std::vector<int>> user_authorship_; // user -> indexes into authorship_
    std::vector<std::vector<int>> user_sites_;      // user -> sites, first-update order
    std::vector<std::int64_t> user_first_update_;
    std::vector<std::vector<std::vector<std::int64_t>>> user_kind_ts_; // [user][kind]
    std::vector<std::vector<UpdateRef>> site_updates_;
    std::unordered_map<std::uint64_t, std::int64_t> first_interaction_; // (user,site) -> ts
};

// JSON-lines codec. One event per line; fields are written in the fixed
// order ts, kind, actor, site, content_ref, text, with absent optionals
// omitted, LF line endings, UTF-8 throughout. parse accepts any field
// order, rejects malformed lines and unknown kinds naming the line number,
// and sorts out-of-order input (counted in sort_warnings).
EventLog parse_event_log(std::istream& in);
EventLog parse_event_log_file(const std::string& path);
void write_event_log(const EventLog& log, std::ostream& out);
void write_event_log_file(const EventLog& log, const std::string& path);
std::string event_to_json_line(const EventRecord& r);

} // namespace rec
