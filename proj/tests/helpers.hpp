#pragma once

// Compact builders for hand-written event-log fixtures. Times are expressed
// in whole days on top of a fixed base so fixtures read as a schedule rather
// than as raw millisecond arithmetic.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recengine/event_log.hpp"

namespace testutil {

constexpr std::int64_t kBase = 1'600'000'000'000LL; // fixture epoch
constexpr std::int64_t kDay = rec::kMsPerDay;
constexpr std::int64_t kHour = rec::kMsPerHour;

inline std::int64_t day(double d) {
    return kBase + static_cast<std::int64_t>(d * static_cast<double>(kDay));
}

inline rec::EventRecord ev(std::int64_t ts, rec::EventKind kind, std::string actor,
                           std::string site, std::string text = {}) {
    rec::EventRecord r;
    r.ts = ts;
    r.kind = kind;
    r.actor = std::move(actor);
    r.site = std::move(site);
    if (!text.empty()) r.text = std::move(text);
    return r;
}

inline rec::EventRecord journal(std::int64_t ts, std::string actor, std::string site,
                                std::string text = {}) {
    return ev(ts, rec::EventKind::journal_update, std::move(actor), std::move(site),
              std::move(text));
}

inline rec::EventRecord comment(std::int64_t ts, std::string actor, std::string site) {
    return ev(ts, rec::EventKind::comment, std::move(actor), std::move(site));
}

inline rec::EventRecord reaction(std::int64_t ts, rec::EventKind kind, std::string actor,
                                 std::string site) {
    return ev(ts, kind, std::move(actor), std::move(site));
}

// n journal updates on `site` by `actor`, one per day starting at `start`.
inline void add_updates(std::vector<rec::EventRecord>& out, const std::string& actor,
                        const std::string& site, std::int64_t start, int n,
                        std::int64_t spacing = kDay) {
    for (int i = 0; i < n; ++i) {
        out.push_back(journal(start + i * spacing, actor, site));
    }
}

inline rec::EventLog make_log(std::vector<rec::EventRecord> records) {
    return rec::EventLog(std::move(records));
}

// A minimal world where `n_authors` users each publish three updates on
// their own site (u<i> on s<i>) during days 0..2 and everyone stays active
// via a comment on their own site at `active_day`. Initiations can then be
// layered on top by the caller.
struct SmallWorld {
    std::vector<rec::EventRecord> events;
    int n_authors;

    explicit SmallWorld(int n, double active_day = 9.5) : n_authors(n) {
        for (int i = 0; i < n; ++i) {
            add_updates(events, user(i), site(i), day(i * 0.01), 3, kDay);
            events.push_back(comment(day(active_day) + i, user(i), site(i)));
        }
    }

    static std::string user(int i) { return "u" + std::to_string(i); }
    static std::string site(int i) { return "s" + std::to_string(i); }

    rec::EventLog log() const { return rec::EventLog(events); }
};

} // namespace testutil
