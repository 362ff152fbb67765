#include "recengine/batcher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "recengine/rng.hpp"

namespace rec {

namespace {

std::string format_score(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string percent_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        const bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                                (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_' ||
                                c == '~';
        if (unreserved) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xf]);
        }
    }
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    return os;
}

} // namespace

std::vector<SiteScore> merge_pair_scores_to_sites(const EventLog& log,
                                                  const std::vector<PairRef>& candidates,
                                                  const std::vector<double>& pair_scores,
                                                  std::size_t n_source_pairs, std::uint64_t seed) {
    if (n_source_pairs == 0) throw std::invalid_argument("merge needs at least one source pair");
    if (pair_scores.size() != n_source_pairs * candidates.size()) {
        throw std::invalid_argument("score matrix shape does not match source/candidate counts");
    }

    // Mean across the source's pairs for each candidate pair.
    std::vector<double> mean(candidates.size(), 0.0);
    for (std::size_t i = 0; i < n_source_pairs; ++i) {
        const double* row = pair_scores.data() + i * candidates.size();
        for (std::size_t j = 0; j < candidates.size(); ++j) mean[j] += row[j];
    }
    for (double& m : mean) {
        m /= static_cast<double>(n_source_pairs);
        if (!std::isfinite(m)) throw std::invalid_argument("non-finite candidate score");
    }

    // Max across each site's author pairs.
    std::unordered_map<int, double> best;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto [it, fresh] = best.try_emplace(candidates[j].site, mean[j]);
        if (!fresh && mean[j] > it->second) it->second = mean[j];
    }

    std::vector<SiteScore> out;
    out.reserve(best.size());
    for (const auto& [site, score] : best) out.push_back(SiteScore{site, score});
    std::sort(out.begin(), out.end(), [&](const SiteScore& a, const SiteScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return keyed_hash(seed, "tiebreak", log.site_name(a.site)) <
               keyed_hash(seed, "tiebreak", log.site_name(b.site));
    });
    return out;
}

std::vector<SiteScore> rank_sites_for_user(const ScorerModel& model, const ScoringContext& ctx,
                                           int user) {
    const auto sources = eligible_source_pairs(ctx.log, user, ctx.t);
    if (sources.empty()) return {};
    const auto candidates = candidate_pairs(ctx.log, user, ctx.t);
    if (candidates.empty()) return {};

    std::vector<double> scores(sources.size() * candidates.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            scores[i * candidates.size() + j] = score_pair(model, sources[i], candidates[j], ctx);
        }
    }
    return merge_pair_scores_to_sites(ctx.log, candidates, scores, sources.size(), model.seed);
}

std::vector<RecommendationSet> draft_assign(const std::vector<ParticipantRanking>& rankings,
                                            const BatchConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("batch needs k >= 1 picks per participant");
    if (cfg.cap < 1) throw std::invalid_argument("batch needs a site cap >= 1");

    const std::size_t n = rankings.size();
    std::vector<RecommendationSet> sets(n);
    std::vector<std::size_t> cursor(n, 0);
    std::vector<std::unordered_set<int>> mine(n);
    std::unordered_map<int, int> assigned; // site -> count this batch

    struct Pick {
        int site;
        double score;
        int model_rank;
    };
    std::vector<std::vector<Pick>> picks(n);

    for (std::size_t i = 0; i < n; ++i) sets[i].participant = rankings[i].user;

    std::vector<std::size_t> order(n);
    for (int round = 0; round < cfg.k; ++round) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(cfg.seed, "draft-order", cfg.batch_id, static_cast<std::uint64_t>(round));
        rng.shuffle(order);

        for (std::size_t i : order) {
            const auto& sites = rankings[i].sites;
            std::size_t& c = cursor[i];
            // Skipped sites never become available again within a batch: the
            // blocklist and own-set are permanent and the cap only fills up,
            // so a monotone cursor visits each participant's list once.
            while (c < sites.size()) {
                const int site = sites[c].site;
                const bool capped = assigned[site] >= cfg.cap;
                if (!capped && !cfg.blocklist.count(site) && !mine[i].count(site)) break;
                ++c;
            }
            if (c >= sites.size()) {
                sets[i].short_set = true;
                continue;
            }
            const int site = sites[c].site;
            ++assigned[site];
            mine[i].insert(site);
            picks[i].push_back(Pick{site, sites[c].score, static_cast<int>(c) + 1});
            ++c;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        // The monotone cursor already yields picks in model-rank order.
        std::sort(picks[i].begin(), picks[i].end(),
                  [](const Pick& a, const Pick& b) { return a.model_rank < b.model_rank; });
        for (const auto& p : picks[i]) {
            sets[i].sites.push_back(p.site);
            sets[i].scores.push_back(p.score);
            sets[i].model_ranks.push_back(p.model_rank);
        }
    }
    return sets;
}

std::unordered_map<int, SiteMetadata> derive_site_metadata(const EventLog& log,
                                                           const std::vector<int>& sites,
                                                           std::int64_t t) {
    std::unordered_map<int, SiteMetadata> meta;
    for (int site : sites) {
        if (meta.count(site)) continue;
        SiteMetadata m;
        m.title = log.site_name(site);
        const auto& updates = log.site_updates(site);
        auto it = std::lower_bound(updates.begin(), updates.end(), t,
                                   [](const EventLog::UpdateRef& u, std::int64_t v) {
                                       return u.ts < v;
                                   });
        if (it != updates.begin()) {
            const auto& rec = log.records()[(it - 1)->record];
            if (rec.text) m.latest_update = *rec.text;
        }
        meta.emplace(site, std::move(m));
    }
    return meta;
}

std::string preview_text(const std::string& update_text, std::size_t limit) {
    if (update_text.size() <= limit) return update_text;

    std::string head = update_text.substr(0, limit);
    const bool at_boundary = std::isspace(static_cast<unsigned char>(update_text[limit])) != 0;
    if (!at_boundary) {
        const std::size_t pos = head.find_last_of(" \t\n\r");
        if (pos != std::string::npos) {
            head.erase(pos);
        } else {
            // No word boundary in range: the hard cut must not split a UTF-8
            // character. Walk back over trailing continuation bytes to the
            // lead byte; drop the sequence only if it is incomplete.
            std::size_t start = head.size();
            while (start > 0 && (static_cast<unsigned char>(head[start - 1]) & 0xc0) == 0x80) {
                --start;
            }
            if (start > 0) {
                const auto lead = static_cast<unsigned char>(head[start - 1]);
                const std::size_t expect = lead >= 0xf0 ? 4 : lead >= 0xe0 ? 3 : lead >= 0xc0 ? 2 : 1;
                if (head.size() - start + 1 < expect) head.erase(start - 1);
            }
        }
    }
    while (!head.empty() && std::isspace(static_cast<unsigned char>(head.back()))) head.pop_back();
    return head + "…";
}

std::string utm_link(const std::string& base_url, const std::string& site_name,
                     const std::string& batch_id, const std::string& participant_name) {
    std::string url = base_url;
    if (!url.empty() && url.back() == '/') url.pop_back();
    url += "/" + percent_encode(site_name) + "/journal";
    url += "?utm_source=rec-engine&utm_medium=email";
    url += "&utm_campaign=" + percent_encode(batch_id);
    url += "&utm_term=" + percent_encode(participant_name);
    url += "&utm_content=" + percent_encode(site_name);
    return url;
}

EmailDocument render_email(const EventLog& log, const RecommendationSet& set,
                           const std::unordered_map<int, SiteMetadata>& metadata,
                           const BatchConfig& cfg) {
    EmailDocument doc;
    doc.participant = set.participant;
    const std::string& who = log.user_name(set.participant);
    doc.subject = "Sites you might want to follow";

    std::string html;
    std::string text;
    html += "<!DOCTYPE html>\n<html>\n<body>\n";
    html += "<p>Hi " + html_escape(who) + ",</p>\n";
    html += "<p>Here are sites from authors like you that you might want to follow:</p>\n<ul>\n";
    text += "Hi " + who + ",\n\n";
    text += "Here are sites from authors like you that you might want to follow:\n\n";

    for (std::size_t i = 0; i < set.sites.size(); ++i) {
        const int site = set.sites[i];
        auto it = metadata.find(site);
        if (it == metadata.end()) {
            throw std::runtime_error("no metadata for site '" + log.site_name(site) + "'");
        }
        const std::string link = utm_link(cfg.site_base_url, log.site_name(site), cfg.batch_id, who);
        doc.links.push_back(link);
        const std::string preview = preview_text(it->second.latest_update);

        html += "  <li><a href=\"" + html_escape(link) + "\"><strong>" +
                html_escape(it->second.title) + "</strong></a>";
        if (!preview.empty()) html += "<br>" + html_escape(preview);
        html += "</li>\n";

        text += "* " + it->second.title + "\n  " + link + "\n";
        if (!preview.empty()) text += "  " + preview + "\n";
        text += "\n";
    }

    html += "</ul>\n<hr>\n";
    html += "<p><a href=\"" + html_escape(cfg.feedback_url) + "\">Give feedback</a> &middot; <a href=\"" +
            html_escape(cfg.faq_url) + "\">FAQ</a> &middot; <a href=\"" +
            html_escape(cfg.unsubscribe_url) + "\">Unsubscribe</a></p>\n";
    html += "</body>\n</html>\n";

    text += "--\n";
    text += "Give feedback: " + cfg.feedback_url + "\n";
    text += "FAQ: " + cfg.faq_url + "\n";
    text += "Unsubscribe: " + cfg.unsubscribe_url + "\n";

    doc.html = std::move(html);
    doc.text = std::move(text);
    return doc;
}

std::vector<PseudoControlSet> build_pseudo_control_sets(
    const std::vector<ParticipantRanking>& rankings,
    const std::unordered_set<int>& recommended_anywhere, int k) {
    std::vector<PseudoControlSet> out;
    out.reserve(rankings.size());
    for (const auto& r : rankings) {
        PseudoControlSet s;
        s.participant = r.user;
        for (const auto& site : r.sites) {
            if (static_cast<int>(s.sites.size()) >= k) break;
            if (recommended_anywhere.count(site.site)) continue;
            s.sites.push_back(site.site);
        }
        s.short_set = static_cast<int>(s.sites.size()) < k;
        out.push_back(std::move(s));
    }
    return out;
}

BatchResult run_batch(const ScorerModel& model, const ScoringContext& ctx,
                      const std::vector<int>& participants,
                      const std::unordered_map<int, SiteMetadata>& metadata,
                      const BatchConfig& cfg,
                      const std::unordered_set<int>& previously_recommended) {
    BatchResult result;
    result.rankings.reserve(participants.size());
    for (int user : participants) {
        ParticipantRanking r;
        r.user = user;
        r.sites = rank_sites_for_user(model, ctx, user);
        result.rankings.push_back(std::move(r));
    }

    result.sets = draft_assign(result.rankings, cfg);

    std::unordered_set<int> recommended = previously_recommended;
    std::vector<int> all_sites;
    for (const auto& s : result.sets) {
        for (int site : s.sites) {
            recommended.insert(site);
            all_sites.push_back(site);
        }
    }
    result.pseudo_controls = build_pseudo_control_sets(result.rankings, recommended, cfg.k);

    const auto derived =
        metadata.empty() ? derive_site_metadata(ctx.log, all_sites, ctx.t) : metadata;
    result.emails.reserve(result.sets.size());
    for (const auto& s : result.sets) {
        result.emails.push_back(render_email(ctx.log, s, derived, cfg));
    }
    return result;
}

void write_manifest_csv(const std::string& path, const EventLog& log,
                        const std::vector<RecommendationSet>& sets, const std::string& batch_id) {
    auto os = open_out(path);
    os << "participant,batch,slot,site,score,model_rank\n";
    for (const auto& s : sets) {
        for (std::size_t i = 0; i < s.sites.size(); ++i) {
            os << csv_field(log.user_name(s.participant)) << ',' << csv_field(batch_id) << ','
               << (i + 1) << ',' << csv_field(log.site_name(s.sites[i])) << ','
               << format_score(s.scores[i]) << ',' << s.model_ranks[i] << '\n';
        }
    }
}

void write_review_file(const std::string& path, const EventLog& log,
                       const std::vector<RecommendationSet>& sets,
                       const std::unordered_set<int>& previously_recommended) {
    std::unordered_map<int, int> fresh; // site -> assignment count
    for (const auto& s : sets) {
        for (int site : s.sites) {
            if (!previously_recommended.count(site)) ++fresh[site];
        }
    }
    std::vector<std::pair<std::string, int>> rows;
    rows.reserve(fresh.size());
    for (const auto& [site, count] : fresh) rows.emplace_back(log.site_name(site), count);
    std::sort(rows.begin(), rows.end());

    auto os = open_out(path);
    os << "# Sites recommended for the first time in this batch.\n";
    os << "# Review each before sending; add rejects to the blocklist and re-run.\n";
    for (const auto& [name, count] : rows) os << name << "\t" << count << "\n";
}

void write_pseudo_control_csv(const std::string& path, const EventLog& log,
                              const std::vector<PseudoControlSet>& sets,
                              const std::string& batch_id) {
    auto os = open_out(path);
    os << "participant,batch,slot,site\n";
    for (const auto& s : sets) {
        for (std::size_t i = 0; i < s.sites.size(); ++i) {
            os << csv_field(log.user_name(s.participant)) << ',' << csv_field(batch_id) << ','
               << (i + 1) << ',' << csv_field(log.site_name(s.sites[i])) << '\n';
        }
    }
}

void write_batch_outputs(const std::string& dir, const EventLog& log, const BatchResult& batch,
                         const BatchConfig& cfg,
                         const std::unordered_set<int>& previously_recommended) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    for (std::size_t i = 0; i < batch.emails.size(); ++i) {
        const auto& email = batch.emails[i];
        const std::string who = log.user_name(email.participant);
        open_out((base / (who + ".html")).string()) << email.html;
        open_out((base / (who + ".txt")).string()) << email.text;
    }
    write_manifest_csv((base / "manifest.csv").string(), log, batch.sets, cfg.batch_id);
    write_review_file((base / "review.txt").string(), log, batch.sets, previously_recommended);
    write_pseudo_control_csv((base / "pseudo_control.csv").string(), log, batch.pseudo_controls,
                             cfg.batch_id);
}

} // namespace rec
