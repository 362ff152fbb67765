#include "recengine/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "recengine/rng.hpp"

extern char** environ;

namespace rec {

namespace {

constexpr const char* kEnvPrefix = "RECENGINE_";

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
    if (key.empty() || !std::islower(static_cast<unsigned char>(key[0]))) return false;
    for (char c : key) {
        if (!std::islower(static_cast<unsigned char>(c)) &&
            !std::isdigit(static_cast<unsigned char>(c)) && c != '_') {
            return false;
        }
    }
    return true;
}

std::string env_key_to_config_key(const std::string& env_name) {
    std::string key;
    key.reserve(env_name.size());
    for (char c : env_name) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return key;
}

} // namespace

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + " line " + std::to_string(line_no) +
                                     ": expected key=value, got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (!valid_key(key)) {
            throw std::runtime_error(origin + " line " + std::to_string(line_no) +
                                     ": invalid key '" + key +
                                     "' (lowercase snake_case required)");
        }
        cfg.values_[key] = trim(stripped.substr(eq + 1));
    }
    return cfg;
}

Config Config::from_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open for reading");
    std::stringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str(), path);
}

Config Config::load(const std::string& path) {
    Config cfg = from_file(path);
    cfg.apply_env_overrides();
    return cfg;
}

void Config::apply_env_overrides() {
    for (char** env = environ; env && *env; ++env) {
        const std::string entry(*env);
        if (entry.rfind(kEnvPrefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(std::string(kEnvPrefix).size(),
                                              eq - std::string(kEnvPrefix).size());
        const std::string key = env_key_to_config_key(name);
        if (!valid_key(key)) continue;
        values_[key] = entry.substr(eq + 1);
    }
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) {
        throw std::invalid_argument("invalid config key '" + key +
                                    "' (lowercase snake_case required)");
    }
    values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw std::runtime_error("missing required config key '" + key + "'");
    }
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

namespace {

template <typename T, typename Parse>
T parse_typed(const std::string& key, const std::string& raw, Parse&& parse) {
    std::size_t used = 0;
    T v{};
    try {
        v = parse(raw, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != raw.size() || raw.empty()) {
        throw std::runtime_error("config key '" + key + "' has non-numeric value '" + raw + "'");
    }
    return v;
}

} // namespace

std::int64_t Config::get_int(const std::string& key) const {
    return parse_typed<std::int64_t>(key, get(key), [](const std::string& s, std::size_t* used) {
        return static_cast<std::int64_t>(std::stoll(s, used));
    });
}

std::int64_t Config::get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    return parse_typed<std::uint64_t>(key, get(key), [](const std::string& s, std::size_t* used) {
        return static_cast<std::uint64_t>(std::stoull(s, used));
    });
}

double Config::get_double(const std::string& key) const {
    return parse_typed<double>(key, get(key), [](const std::string& s, std::size_t* used) {
        return std::stod(s, used);
    });
}

double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& raw = get(key);
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw std::runtime_error("config key '" + key + "' has non-boolean value '" + raw + "'");
}

std::string Config::canonical_text() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t Config::hash() const {
    const std::string text = canonical_text();
    return fnv1a64(text.data(), text.size());
}

std::string bytes_hash_hex(const std::string& data) {
    const std::uint64_t h = fnv1a64(data.data(), data.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open for hashing");
    std::stringstream buf;
    buf << is.rdbuf();
    return bytes_hash_hex(buf.str());
}

std::string provenance_json(const std::string& command, std::uint64_t seed, const Config& config,
                            const std::vector<std::pair<std::string, std::string>>& input_hashes,
                            const std::vector<std::pair<std::string, std::string>>& output_hashes) {
    nlohmann::ordered_json j;
    j["tool"] = "recengine";
    j["version"] = kEngineVersion;
    j["command"] = command;
    j["seed"] = seed;
    {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config.hash()));
        j["config_hash"] = buf;
    }
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.values()) j["config"][k] = v;
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : input_hashes) {
        j["inputs"].push_back({{"path", path}, {"fnv1a64", hash}});
    }
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : output_hashes) {
        j["outputs"].push_back({{"path", path}, {"fnv1a64", hash}});
    }
    return j.dump(2) + "\n";
}

void write_provenance_file(const std::string& path, const std::string& json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os << json;
}

} // namespace rec
