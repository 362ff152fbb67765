#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <vector>

#include "recengine/event_log.hpp"

#include "helpers.hpp"

using namespace rec;
using namespace testutil;

namespace {

// Brute-force oracle: count events by `user` of kind `k` with lo < ts < hi,
// straight off the raw records.
int count_window_oracle(const std::vector<EventRecord>& recs, const std::string& user,
                        EventKind k, std::int64_t lo, std::int64_t hi) {
    int n = 0;
    for (const auto& r : recs) {
        if (r.actor == user && r.kind == k && r.ts > lo && r.ts < hi) ++n;
    }
    return n;
}

std::vector<EventRecord> mixed_fixture() {
    std::vector<EventRecord> recs;
    add_updates(recs, "ann", "site-a", day(0), 4);
    add_updates(recs, "bob", "site-b", day(1), 3);
    recs.push_back(comment(day(2.5), "bob", "site-a"));
    recs.push_back(ev(day(3.1), EventKind::reaction, "ann", "site-b"));
    recs.push_back(ev(day(3.2), EventKind::guestbook, "cay", "site-a"));
    recs.push_back(ev(day(3.3), EventKind::visit, "cay", "site-b"));
    recs.push_back(ev(day(3.4), EventKind::follow, "cay", "site-a"));
    recs.push_back(journal(day(4.0), "cay", "site-c", "hello from cay"));
    return recs;
}

} // namespace

TEST_CASE("event kind names round-trip") {
    for (int i = 0; i < kEventKindCount; ++i) {
        const auto k = static_cast<EventKind>(i);
        const auto back = event_kind_from_name(event_kind_name(k));
        REQUIRE(back.has_value());
        CHECK(*back == k);
    }
    CHECK_FALSE(event_kind_from_name("banana").has_value());
}

TEST_CASE("json lines round-trip preserves every record") {
    std::vector<EventRecord> recs = mixed_fixture();
    recs[0].content_ref = "j-001";
    recs[0].text = "first entry \"quoted\" and unicode: célébration";
    const EventLog log(recs);

    std::ostringstream out;
    write_event_log(log, out);
    std::istringstream in(out.str());
    const EventLog back = parse_event_log(in);

    REQUIRE(back.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(back.records()[i] == log.records()[i]);
    }
    // A second write is byte-identical: the codec is canonical.
    std::ostringstream again;
    write_event_log(back, again);
    CHECK(again.str() == out.str());
}

TEST_CASE("parser accepts any field order and skips unknown fields gracefully") {
    std::istringstream in(
        R"({"site": "s1", "actor": "u1", "kind": "journal_update", "ts": 1600000000000})"
        "\n"
        R"({"ts": 1600000360000, "kind": "comment", "actor": "u2", "site": "s1"})"
        "\n");
    const EventLog log = parse_event_log(in);
    REQUIRE(log.size() == 2);
    CHECK(log.records()[0].actor == "u1");
    CHECK(log.records()[1].kind == EventKind::comment);
}

TEST_CASE("parser rejects malformed input with the line number") {
    SUBCASE("broken json") {
        std::istringstream in("{\"ts\": 1, \"kind\": \"comment\", \"actor\": \"u\"\n");
        CHECK_THROWS_WITH_AS(parse_event_log(in), doctest::Contains("line 1"),
                             std::runtime_error);
    }
    SUBCASE("unknown kind") {
        std::istringstream in(
            R"({"ts": 1, "kind": "megaphone", "actor": "u", "site": "s"})" "\n");
        CHECK_THROWS_WITH_AS(parse_event_log(in), doctest::Contains("line 1"),
                             std::runtime_error);
    }
    SUBCASE("missing required field") {
        std::istringstream in(R"({"ts": 1, "kind": "comment", "actor": "u"})" "\n");
        CHECK_THROWS_AS(parse_event_log(in), std::runtime_error);
    }
    SUBCASE("error names the later line") {
        std::istringstream in(
            R"({"ts": 1, "kind": "comment", "actor": "u", "site": "s"})" "\n"
            "not json\n");
        CHECK_THROWS_WITH_AS(parse_event_log(in), doctest::Contains("line 2"),
                             std::runtime_error);
    }
}

TEST_CASE("out-of-order input is sorted stably and counted") {
    std::vector<EventRecord> recs;
    recs.push_back(journal(day(3), "a", "s1"));
    recs.push_back(journal(day(1), "b", "s2"));
    recs.push_back(comment(day(1), "c", "s1")); // ties keep input order
    recs.push_back(journal(day(2), "d", "s3"));
    const EventLog log(recs);

    CHECK(log.sort_warnings() > 0);
    REQUIRE(log.size() == 4);
    CHECK(std::is_sorted(log.records().begin(), log.records().end(),
                         [](const auto& x, const auto& y) { return x.ts < y.ts; }));
    CHECK(log.records()[0].actor == "b"); // stable: b before c at the tied ts
    CHECK(log.records()[1].actor == "c");

    const EventLog sorted_log(std::vector<EventRecord>{journal(day(1), "a", "s1"),
                                                       journal(day(2), "b", "s2")});
    CHECK(sorted_log.sort_warnings() == 0);
}

TEST_CASE("authorship starts at the first journal update and never lapses") {
    const auto recs = mixed_fixture();
    const EventLog log(recs);
    const int ann = log.user_index("ann");
    const int bob = log.user_index("bob");
    const int cay = log.user_index("cay");
    const int site_a = log.site_index("site-a");
    const int site_c = log.site_index("site-c");
    REQUIRE(ann >= 0);
    REQUIRE(site_a >= 0);

    CHECK_FALSE(log.is_author(ann, site_a, day(0)));       // cutoff is strict
    CHECK(log.is_author(ann, site_a, day(0) + 1));
    CHECK(log.is_author(ann, site_a, day(1000)));          // never lapses
    CHECK_FALSE(log.is_author(bob, site_a, day(1000)));    // comments grant nothing
    CHECK_FALSE(log.is_author(cay, site_a, day(1000)));    // nor guestbook/follow
    CHECK(log.is_author(cay, site_c, day(4) + 1));

    CHECK(log.update_count(ann, site_a, day(2) + 1) == 3);
    CHECK(log.update_count(ann, site_a, day(100)) == 4);

    const auto authors = log.authors_of(site_a, day(100));
    REQUIRE(authors.size() == 1);
    CHECK(authors[0] == ann);
}

TEST_CASE("first and last timestamps follow the strict-cutoff convention") {
    const EventLog log(mixed_fixture());
    const int ann = log.user_index("ann");
    const int cay = log.user_index("cay");
    const int site_b = log.site_index("site-b");

    CHECK(log.first_update_ts(ann) == day(0));
    CHECK(log.first_update_ts(cay) == day(4));
    CHECK(log.first_update_ts(log.user_index("bob")) == day(1));
    CHECK(log.site_first_update_ts(site_b) == day(1));

    CHECK(log.last_event_before(ann, EventKind::journal_update, day(3)) == day(2));
    CHECK(log.last_event_before(ann, EventKind::journal_update, day(2)) == day(1));
    CHECK(log.last_event_before(ann, EventKind::comment, day(100)) == kNever);
}

TEST_CASE("window counts agree with a brute-force scan") {
    const auto recs = mixed_fixture();
    const EventLog log(recs);
    const std::vector<std::string> users{"ann", "bob", "cay"};
    const std::vector<std::pair<std::int64_t, std::int64_t>> windows{
        {day(0), day(2)},  {day(-1), day(10)}, {day(1), day(1)},
        {day(2), day(4)},  {day(3), day(3.5)},
    };
    for (const auto& u : users) {
        const int idx = log.user_index(u);
        for (int k = 0; k < kEventKindCount; ++k) {
            const auto kind = static_cast<EventKind>(k);
            for (const auto& [lo, hi] : windows) {
                CAPTURE(u);
                CAPTURE(k);
                CHECK(log.count_in_window(idx, kind, lo, hi) ==
                      count_window_oracle(recs, u, kind, lo, hi));
            }
        }
    }
}

TEST_CASE("site update index is sorted and windowed correctly") {
    std::vector<EventRecord> recs;
    add_updates(recs, "a", "s", day(0), 3);
    add_updates(recs, "b", "s", day(0.5), 3); // second author interleaves
    const EventLog log(recs);
    const int s = log.site_index("s");

    const auto& ups = log.site_updates(s);
    REQUIRE(ups.size() == 6);
    CHECK(std::is_sorted(ups.begin(), ups.end(),
                         [](const auto& x, const auto& y) { return x.ts < y.ts; }));
    CHECK(log.site_update_count_window(s, day(0), day(1)) == 1);   // open: day(0.5) only
    CHECK(log.site_update_count_window(s, day(-1), day(10)) == 6);
    CHECK(log.site_last_update_before(s, day(1)) == day(0.5));
    CHECK(log.site_last_update_before(s, day(0)) == kNever);
}

TEST_CASE("first interaction is recorded per user-site pair") {
    std::vector<EventRecord> recs;
    add_updates(recs, "a", "sa", day(0), 3);
    recs.push_back(comment(day(5), "b", "sa"));
    recs.push_back(comment(day(8), "b", "sa")); // later ones do not move it
    recs.push_back(ev(day(6), EventKind::visit, "c", "sa")); // visits are not interactions
    const EventLog log(recs);
    const int b = log.user_index("b");
    const int c = log.user_index("c");
    const int sa = log.site_index("sa");

    CHECK(log.first_interaction_ts(b, sa) == day(5));
    CHECK(log.first_interaction_ts(c, sa) == kNever);
    CHECK(log.first_interaction_ts(log.user_index("a"), sa) == kNever);
}

TEST_CASE("unknown names index to -1") {
    const EventLog log(mixed_fixture());
    CHECK(log.user_index("nobody") == -1);
    CHECK(log.site_index("nowhere") == -1);
}

TEST_CASE("interaction and activity kind predicates") {
    CHECK(is_interaction_kind(EventKind::reaction));
    CHECK(is_interaction_kind(EventKind::comment));
    CHECK(is_interaction_kind(EventKind::guestbook));
    CHECK_FALSE(is_interaction_kind(EventKind::journal_update));
    CHECK_FALSE(is_interaction_kind(EventKind::visit));
    CHECK_FALSE(is_interaction_kind(EventKind::follow));

    CHECK(is_activity_kind(EventKind::journal_update));
    CHECK(is_activity_kind(EventKind::comment));
    CHECK_FALSE(is_activity_kind(EventKind::visit));
    CHECK_FALSE(is_activity_kind(EventKind::follow));
}
