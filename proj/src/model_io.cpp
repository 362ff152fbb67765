#include "recengine/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace rec {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'C', 'M', 'D', 'L', '0', '1'};

using ordered_json = nlohmann::ordered_json;

void append_f64_le(std::string& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

std::vector<double> take_f64_le(const std::string& blob, std::size_t& off, std::size_t n,
                                const std::string& path, const char* what) {
    if (off + 8 * n > blob.size()) {
        throw std::runtime_error(path + ": truncated model file while reading " + what);
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(
                        static_cast<unsigned char>(blob[off + 8 * i + b]))
                    << (8 * b);
        }
        std::memcpy(&v[i], &bits, sizeof(bits));
    }
    off += 8 * n;
    return v;
}

const char* embedder_kind_name(EmbedderSpec::Kind k) {
    return k == EmbedderSpec::Kind::hashing ? "hashing" : "precomputed";
}

EmbedderSpec::Kind embedder_kind_from_name(const std::string& name, const std::string& path) {
    if (name == "hashing") return EmbedderSpec::Kind::hashing;
    if (name == "precomputed") return EmbedderSpec::Kind::precomputed;
    throw std::runtime_error(path + ": unknown embedder kind '" + name + "'");
}

std::size_t mlp_weight_count(int in_dim, int hidden) {
    const std::size_t d = static_cast<std::size_t>(in_dim);
    const std::size_t h = static_cast<std::size_t>(hidden);
    return d * h + h + h * h + h + h + 1;
}

} // namespace

void write_model_file(const std::string& path, const ScorerModel& model) {
    ordered_json header;
    header["format"] = "recengine-model";
    header["kind"] = scorer_kind_name(model.kind);
    header["seed"] = model.seed;
    header["features"] = {{"text_dim", model.features.text_dim},
                          {"use_text", model.features.use_text},
                          {"use_activity", model.features.use_activity},
                          {"use_network", model.features.use_network}};
    header["embedder"] = {{"kind", embedder_kind_name(model.embedder.kind)},
                          {"dim", model.embedder.dim},
                          {"seed", model.embedder.seed},
                          {"min_ngram", model.embedder.min_ngram},
                          {"max_ngram", model.embedder.max_ngram},
                          {"table_path", model.embedder.table_path}};
    header["stats_len"] = model.stats.mean.size();
    if (model.stats.mean.size() != model.stats.stdev.size()) {
        throw std::runtime_error(path + ": standardizer mean/stdev length mismatch");
    }
    if (model.kind == ScorerKind::mlp) {
        header["mlp"] = {{"in_dim", model.mlp_params.in_dim},
                         {"hidden", model.mlp_params.hidden},
                         {"n_weights", model.mlp_params.w.size()}};
        header["mlp_cfg"] = {{"hidden_units", model.mlp_cfg.hidden_units},
                             {"dropout", model.mlp_cfg.dropout},
                             {"weight_decay", model.mlp_cfg.weight_decay},
                             {"max_lr", model.mlp_cfg.max_lr},
                             {"epochs", model.mlp_cfg.epochs},
                             {"batch_size", model.mlp_cfg.batch_size},
                             {"holdout_fraction", model.mlp_cfg.holdout_fraction},
                             {"seed", model.mlp_cfg.seed}};
        if (model.mlp_params.w.size() !=
            mlp_weight_count(model.mlp_params.in_dim, model.mlp_params.hidden)) {
            throw std::runtime_error(path + ": perceptron weight count does not match its shape");
        }
    }
    if (model.kind == ScorerKind::matrix_factorization) {
        header["mf"] = {{"dim", model.mf_params.dim},
                        {"author_ids", model.mf_params.author_ids},
                        {"site_ids", model.mf_params.site_ids}};
        header["mf_cfg"] = {{"dim", model.mf_cfg.dim},
                            {"weight_decay", model.mf_cfg.weight_decay},
                            {"max_lr", model.mf_cfg.max_lr},
                            {"epochs", model.mf_cfg.epochs},
                            {"batch_size", model.mf_cfg.batch_size},
                            {"min_occurrences", model.mf_cfg.min_occurrences},
                            {"seed", model.mf_cfg.seed}};
        const std::size_t na = model.mf_params.author_ids.size() + 1;
        const std::size_t ns = model.mf_params.site_ids.size() + 1;
        const std::size_t dim = static_cast<std::size_t>(model.mf_params.dim);
        if (model.mf_params.author_emb.size() != na * dim ||
            model.mf_params.site_emb.size() != ns * dim) {
            throw std::runtime_error(path + ": factorization table sizes do not match id lists");
        }
    }
    header["meta"] = {{"seed", model.meta.seed},
                      {"best_epoch", model.meta.best_epoch},
                      {"epochs", model.meta.epochs},
                      {"best_holdout_loss", model.meta.best_holdout_loss},
                      {"n_train_rows", model.meta.n_train_rows},
                      {"n_holdout_rows", model.meta.n_holdout_rows}};

    const std::string header_text = header.dump();
    if (header_text.size() > 0xffffffffull) {
        throw std::runtime_error(path + ": model header too large");
    }

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    const std::uint32_t hlen = static_cast<std::uint32_t>(header_text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((hlen >> (8 * i)) & 0xff));
    out += header_text;
    append_f64_le(out, model.stats.mean);
    append_f64_le(out, model.stats.stdev);
    if (model.kind == ScorerKind::mlp) append_f64_le(out, model.mlp_params.w);
    if (model.kind == ScorerKind::matrix_factorization) {
        append_f64_le(out, model.mf_params.author_emb);
        append_f64_le(out, model.mf_params.site_emb);
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw std::runtime_error(path + ": write failed");
}

ScorerModel read_model_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open for reading");
    std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    if (data.size() < sizeof(kMagic) + 4 ||
        std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path + ": not a model file (bad magic)");
    }
    std::uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) {
        hlen |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[sizeof(kMagic) + i]))
                << (8 * i);
    }
    std::size_t off = sizeof(kMagic) + 4;
    if (off + hlen > data.size()) {
        throw std::runtime_error(path + ": truncated model file while reading header");
    }
    ordered_json header;
    try {
        header = ordered_json::parse(data.substr(off, hlen));
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": malformed model header: " + e.what());
    }
    off += hlen;

    ScorerModel m;
    try {
        if (header.at("format").get<std::string>() != "recengine-model") {
            throw std::runtime_error(path + ": unexpected format field");
        }
        const std::string kind_name = header.at("kind").get<std::string>();
        auto kind = scorer_kind_from_name(kind_name);
        if (!kind) throw std::runtime_error(path + ": unknown scorer kind '" + kind_name + "'");
        m.kind = *kind;
        m.seed = header.at("seed").get<std::uint64_t>();

        const auto& f = header.at("features");
        m.features.text_dim = f.at("text_dim").get<int>();
        m.features.use_text = f.at("use_text").get<bool>();
        m.features.use_activity = f.at("use_activity").get<bool>();
        m.features.use_network = f.at("use_network").get<bool>();

        const auto& e = header.at("embedder");
        m.embedder.kind = embedder_kind_from_name(e.at("kind").get<std::string>(), path);
        m.embedder.dim = e.at("dim").get<int>();
        m.embedder.seed = e.at("seed").get<std::uint64_t>();
        m.embedder.min_ngram = e.at("min_ngram").get<int>();
        m.embedder.max_ngram = e.at("max_ngram").get<int>();
        m.embedder.table_path = e.at("table_path").get<std::string>();

        const std::size_t stats_len = header.at("stats_len").get<std::size_t>();
        m.stats.mean = take_f64_le(data, off, stats_len, path, "standardizer mean");
        m.stats.stdev = take_f64_le(data, off, stats_len, path, "standardizer stdev");

        if (m.kind == ScorerKind::mlp) {
            const auto& p = header.at("mlp");
            m.mlp_params.in_dim = p.at("in_dim").get<int>();
            m.mlp_params.hidden = p.at("hidden").get<int>();
            const std::size_t nw = p.at("n_weights").get<std::size_t>();
            if (nw != mlp_weight_count(m.mlp_params.in_dim, m.mlp_params.hidden)) {
                throw std::runtime_error(path +
                                         ": perceptron weight count does not match its shape");
            }
            m.mlp_params.w = take_f64_le(data, off, nw, path, "perceptron weights");
            const auto& c = header.at("mlp_cfg");
            m.mlp_cfg.hidden_units = c.at("hidden_units").get<int>();
            m.mlp_cfg.dropout = c.at("dropout").get<double>();
            m.mlp_cfg.weight_decay = c.at("weight_decay").get<double>();
            m.mlp_cfg.max_lr = c.at("max_lr").get<double>();
            m.mlp_cfg.epochs = c.at("epochs").get<int>();
            m.mlp_cfg.batch_size = c.at("batch_size").get<int>();
            m.mlp_cfg.holdout_fraction = c.at("holdout_fraction").get<double>();
            m.mlp_cfg.seed = c.at("seed").get<std::uint64_t>();
        }
        if (m.kind == ScorerKind::matrix_factorization) {
            const auto& p = header.at("mf");
            m.mf_params.dim = p.at("dim").get<int>();
            m.mf_params.author_ids = p.at("author_ids").get<std::vector<std::string>>();
            m.mf_params.site_ids = p.at("site_ids").get<std::vector<std::string>>();
            const std::size_t dim = static_cast<std::size_t>(m.mf_params.dim);
            m.mf_params.author_emb = take_f64_le(
                data, off, (m.mf_params.author_ids.size() + 1) * dim, path, "author embeddings");
            m.mf_params.site_emb = take_f64_le(
                data, off, (m.mf_params.site_ids.size() + 1) * dim, path, "site embeddings");
            const auto& c = header.at("mf_cfg");
            m.mf_cfg.dim = c.at("dim").get<int>();
            m.mf_cfg.weight_decay = c.at("weight_decay").get<double>();
            m.mf_cfg.max_lr = c.at("max_lr").get<double>();
            m.mf_cfg.epochs = c.at("epochs").get<int>();
            m.mf_cfg.batch_size = c.at("batch_size").get<int>();
            m.mf_cfg.min_occurrences = c.at("min_occurrences").get<int>();
            m.mf_cfg.seed = c.at("seed").get<std::uint64_t>();
        }

        const auto& t = header.at("meta");
        m.meta.seed = t.at("seed").get<std::uint64_t>();
        m.meta.best_epoch = t.at("best_epoch").get<int>();
        m.meta.epochs = t.at("epochs").get<int>();
        m.meta.best_holdout_loss = t.at("best_holdout_loss").get<double>();
        m.meta.n_train_rows = t.at("n_train_rows").get<std::size_t>();
        m.meta.n_holdout_rows = t.at("n_holdout_rows").get<std::size_t>();
    } catch (const std::runtime_error&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": invalid model header: " + e.what());
    }

    if (off != data.size()) {
        throw std::runtime_error(path + ": trailing bytes after model payload");
    }
    return m;
}

} // namespace rec
