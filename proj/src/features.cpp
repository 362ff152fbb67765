#include "recengine/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "recengine/rng.hpp"

namespace rec {

namespace {

double hours_since(std::int64_t last_ts, std::int64_t t) {
    if (last_ts == kNever) return kMissingRecencyHours;
    return static_cast<double>(t - last_ts) / static_cast<double>(kMsPerHour);
}

constexpr EventKind kActivityKinds[4] = {EventKind::journal_update, EventKind::reaction,
                                         EventKind::comment, EventKind::guestbook};

} // namespace

std::array<double, 9> activity_features(const EventLog& log, int author, std::int64_t t) {
    std::array<double, 9> out{};
    const std::int64_t lo = t - kMsPerWeek;
    for (int i = 0; i < 4; ++i) {
        out[static_cast<std::size_t>(2 * i)] =
            static_cast<double>(log.count_in_window(author, kActivityKinds[i], lo, t));
        out[static_cast<std::size_t>(2 * i + 1)] =
            hours_since(log.last_event_before(author, kActivityKinds[i], t), t);
    }
    out[8] = hours_since(log.first_update_ts(author) < t ? log.first_update_ts(author) : kNever, t);
    return out;
}

std::array<double, 3> network_features(const InteractionGraph& g, int author) {
    return {static_cast<double>(g.indegree(author)), static_cast<double>(g.outdegree(author)),
            static_cast<double>(g.component_size(author))};
}

TextEmbedder::TextEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim < 1) throw std::runtime_error("embedder dim must be positive");
    if (spec_.kind == EmbedderSpec::Kind::precomputed) {
        if (spec_.table_path.empty()) {
            throw std::runtime_error("precomputed embedder needs a table path");
        }
        for (auto& [id, vec] : read_embedding_table(spec_.table_path, spec_.dim)) {
            table_.emplace(id, std::move(vec));
        }
    }
}

std::vector<double> TextEmbedder::embed_text(const std::string& text) const {
    std::vector<double> v(static_cast<std::size_t>(spec_.dim), 0.0);
    // Tokenize: lowercase runs of alphanumerics.
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));

    for (int order = spec_.min_ngram; order <= spec_.max_ngram; ++order) {
        if (order < 1 || tokens.size() + 1 < static_cast<std::size_t>(order)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int k = 1; k < order; ++k) {
                gram.push_back(' ');
                gram += tokens[i + static_cast<std::size_t>(k)];
            }
            const std::uint64_t h = keyed_hash(spec_.seed, gram);
            const std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(spec_.dim));
            v[bucket] += (h >> 63) ? 1.0 : -1.0;
        }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> TextEmbedder::embed_update(const EventLog& log, std::size_t record) const {
    const auto& r = log.records()[record];
    if (spec_.kind == EmbedderSpec::Kind::hashing) {
        return embed_text(r.text.value_or(""));
    }
    if (!r.content_ref) {
        throw std::runtime_error("update on site '" + r.site + "' at ts " + std::to_string(r.ts) +
                                 " has no content_ref to look up");
    }
    auto it = table_.find(*r.content_ref);
    if (it == table_.end()) {
        throw std::runtime_error("embedding table has no row for content_ref '" + *r.content_ref +
                                 "'");
    }
    std::vector<double> v(it->second.begin(), it->second.end());
    return v;
}

const std::vector<double>& TextEmbedder::embed_site(const EventLog& log, int site,
                                                    std::int64_t t) const {
    const auto& updates = log.site_updates(site);
    auto end = std::lower_bound(updates.begin(), updates.end(), t,
                                [](const EventLog::UpdateRef& u, std::int64_t v) { return u.ts < v; });
    if (end == updates.begin()) {
        throw std::runtime_error("site '" + log.site_name(site) + "' has no updates before ts " +
                                 std::to_string(t));
    }
    const std::size_t last_idx = static_cast<std::size_t>(end - updates.begin()) - 1;
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(site)) << 32) |
                              static_cast<std::uint32_t>(last_idx);
    auto cached = site_cache_.find(key);
    if (cached != site_cache_.end()) return cached->second;

    std::vector<double> mean(static_cast<std::size_t>(spec_.dim), 0.0);
    const std::size_t take = std::min<std::size_t>(3, last_idx + 1);
    for (std::size_t k = 0; k < take; ++k) {
        const auto v = embed_update(log, updates[last_idx - k].record);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(take);
    return site_cache_.emplace(key, std::move(mean)).first->second;
}

namespace {

constexpr char kTableMagic[8] = {'R', 'E', 'C', 'E', 'M', 'B', '0', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 4) {
        std::uint32_t b;
        std::memcpy(&b, &value, 4);
        bits = b;
    } else {
        std::memcpy(&bits, &value, 8);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw std::runtime_error("unexpected end of file reading embedding table");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    T value;
    if constexpr (sizeof(T) == 4) {
        std::uint32_t b = static_cast<std::uint32_t>(bits);
        std::memcpy(&value, &b, 4);
    } else {
        std::memcpy(&value, &bits, 8);
    }
    return value;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

void write_embedding_table(const std::string& path,
                           const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write embedding table: " + path);
    if (has_suffix(path, ".jsonl")) {
        for (const auto& [id, vec] : rows) {
            nlohmann::json j = {{"id", id}, {"vec", vec}};
            out << j.dump() << "\n";
        }
        return;
    }
    const int dim = rows.empty() ? 0 : static_cast<int>(rows.front().second.size());
    out.write(kTableMagic, sizeof(kTableMagic));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
    write_le<std::uint64_t>(out, rows.size());
    for (const auto& [id, vec] : rows) {
        if (static_cast<int>(vec.size()) != dim) {
            throw std::runtime_error("embedding table rows disagree on dimension");
        }
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (float f : vec) write_le<float>(out, f);
    }
}

std::unordered_map<std::string, std::vector<float>> read_embedding_table(const std::string& path,
                                                                         int expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding table: " + path);
    std::unordered_map<std::string, std::vector<float>> out;
    if (has_suffix(path, ".jsonl")) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            auto vec = j.at("vec").get<std::vector<float>>();
            if (expected_dim >= 0 && static_cast<int>(vec.size()) != expected_dim) {
                throw std::runtime_error("embedding table line " + std::to_string(line_no) +
                                         ": dimension " + std::to_string(vec.size()) +
                                         " != expected " + std::to_string(expected_dim));
            }
            out[j.at("id").get<std::string>()] = std::move(vec);
        }
        return out;
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kTableMagic, 8) != 0) {
        throw std::runtime_error("bad embedding table magic in " + path);
    }
    const auto dim = read_le<std::uint32_t>(in);
    if (expected_dim >= 0 && static_cast<int>(dim) != expected_dim) {
        throw std::runtime_error("embedding table dimension " + std::to_string(dim) +
                                 " != expected " + std::to_string(expected_dim));
    }
    const auto count = read_le<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = read_le<std::uint32_t>(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw std::runtime_error("unexpected end of file reading embedding table");
        std::vector<float> vec(dim);
        for (auto& f : vec) f = read_le<float>(in);
        out[std::move(id)] = std::move(vec);
    }
    return out;
}

void pair_feature_block(const EventLog& log, const InteractionGraph& g, const TextEmbedder& emb,
                        const FeatureConfig& cfg, PairRef pair, std::int64_t t, double* out) {
    const int d = cfg.text_dim;
    if (cfg.use_text) {
        const auto& v = emb.embed_site(log, pair.site, t);
        std::copy(v.begin(), v.end(), out);
    } else {
        std::fill(out, out + d, 0.0);
    }
    if (cfg.use_activity) {
        const auto a = activity_features(log, pair.author, t);
        std::copy(a.begin(), a.end(), out + d);
    } else {
        std::fill(out + d, out + d + 9, 0.0);
    }
    if (cfg.use_network) {
        const auto n = network_features(g, pair.author);
        std::copy(n.begin(), n.end(), out + d + 9);
    } else {
        std::fill(out + d + 9, out + d + 12, 0.0);
    }
}

void assemble_features(const EventLog& log, const InteractionGraph& g, const TextEmbedder& emb,
                       const FeatureConfig& cfg, PairRef source, PairRef candidate,
                       std::int64_t t, double* out) {
    const int half = cfg.pair_block_length();
    pair_feature_block(log, g, emb, cfg, source, t, out);
    pair_feature_block(log, g, emb, cfg, candidate, t, out + half);
    double* dy = out + 2 * half;
    if (cfg.use_network) {
        const auto d = dyadic_features(g, source.author, candidate.author);
        dy[0] = d.weakly_connected;
        dy[1] = d.friend_of_friend;
        dy[2] = d.prior_reciprocal;
    } else {
        dy[0] = dy[1] = dy[2] = 0.0;
    }
}

std::vector<double> assemble_feature_vec(const EventLog& log, const InteractionGraph& g,
                                         const TextEmbedder& emb, const FeatureConfig& cfg,
                                         PairRef source, PairRef candidate, std::int64_t t) {
    std::vector<double> out(static_cast<std::size_t>(cfg.feature_length()));
    assemble_features(log, g, emb, cfg, source, candidate, t, out.data());
    return out;
}

void Standardizer::apply(double* x) const {
    for (std::size_t i = 0; i < mean.size(); ++i) {
        x[i] = (x[i] - mean[i]) / stdev[i];
    }
}

std::vector<double> Standardizer::applied(std::vector<double> x) const {
    if (x.size() != mean.size()) throw std::runtime_error("standardizer length mismatch");
    apply(x.data());
    return x;
}

Standardizer fit_standardizer(const std::vector<double>& rows, std::size_t n_rows,
                              const FeatureConfig& cfg) {
    const std::size_t dim = static_cast<std::size_t>(cfg.feature_length());
    if (n_rows == 0) throw std::runtime_error("cannot fit standardizer on zero rows");
    if (rows.size() != n_rows * dim) throw std::runtime_error("feature matrix shape mismatch");
    Standardizer st;
    st.mean.assign(dim, 0.0);
    st.stdev.assign(dim, 1.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* x = rows.data() + r * dim;
        for (std::size_t i = 0; i < dim; ++i) st.mean[i] += x[i];
    }
    for (std::size_t i = 0; i < dim; ++i) st.mean[i] /= static_cast<double>(n_rows);
    std::vector<double> var(dim, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* x = rows.data() + r * dim;
        for (std::size_t i = 0; i < dim; ++i) {
            const double dlt = x[i] - st.mean[i];
            var[i] += dlt * dlt;
        }
    }
    for (std::size_t i = 0; i < dim; ++i) {
        if (cfg.is_text_dim(static_cast<int>(i))) {
            st.mean[i] = 0.0;
            st.stdev[i] = 1.0;
            continue;
        }
        const double v = var[i] / static_cast<double>(n_rows);
        st.stdev[i] = v < 1e-18 ? 1.0 : std::sqrt(v);
    }
    return st;
}

} // namespace rec
