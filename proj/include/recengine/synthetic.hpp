#pragma once

#include <cstdint>

#include "recengine/event_log.hpp"

namespace rec {

// Generator for synthetic community logs. Authors carry a latent topic;
// journal text is drawn from a topic-conditioned vocabulary so that
// text-similarity scorers have real signal to find. Interaction targets are
// drawn with probability proportional to a static per-site popularity weight
// raised to popularity_skew, times an affinity boost that scales with
// homophily: same-topic sites and sites whose authors previously interacted
// with the actor's own sites are preferred. With homophily = 0 and
// popularity_skew = 0 every valid target is equally likely.
//
// Valid targets for a non-journal event by actor a at time t are exactly the
// sites with a journal update strictly before t that a has not updated before
// t, so no site is interacted with before its first update.
struct SyntheticConfig {
    int n_authors = 500;
    int n_sites = 600;
    int horizon_days = 120;
    // Expected events per author per day, by kind.
    double rate_journal = 0.10;
    double rate_reaction = 0.06;
    double rate_comment = 0.03;
    double rate_guestbook = 0.01;
    double rate_visit = 0.08;
    double rate_follow = 0.005;
    double homophily = 0.0;       // in [0, 1]
    double popularity_skew = 0.0; // >= 0
    int n_topics = 12;
    double coauthor_prob = 0.12; // chance a site gets a second author
    std::uint64_t seed = 1;
    std::int64_t start_ts = 1500000000000LL;
};

EventLog generate_synthetic_log(const SyntheticConfig& cfg);

} // namespace rec
