#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rec {

inline constexpr const char* kEngineVersion = "1.0.0";

// Flat key=value configuration. One pair per line, full-line '#' comments,
// blank lines ignored; keys are lowercase snake_case so each key maps
// bijectively to the environment override RECENGINE_<KEY, upper-cased>.
// Later assignments win. Values are raw strings until a typed getter parses
// them; a failed parse names the key.
class Config {
public:
    Config() = default;
    static Config from_string(const std::string& text, const std::string& origin = "<config>");
    static Config from_file(const std::string& path);
    // from_file + apply_env_overrides, the way the tools load configuration.
    static Config load(const std::string& path);

    // Pulls every RECENGINE_* environment variable into the map.
    void apply_env_overrides();

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const; // throws when absent
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    // Sorted key=value lines; the basis of the config hash.
    std::string canonical_text() const;
    std::uint64_t hash() const;

private:
    std::map<std::string, std::string> values_;
};

// Hex FNV-1a (64-bit) content hashes for provenance records.
std::string bytes_hash_hex(const std::string& data);
std::string file_hash_hex(const std::string& path);

// Machine-readable record of how an artifact was produced: tool version,
// command, seed, the effective configuration and its hash, and content
// hashes of every input and output. Contains no wall-clock time, so a
// reproduced run yields a byte-identical record.
std::string provenance_json(const std::string& command, std::uint64_t seed, const Config& config,
                            const std::vector<std::pair<std::string, std::string>>& input_hashes,
                            const std::vector<std::pair<std::string, std::string>>& output_hashes);
void write_provenance_file(const std::string& path, const std::string& json);

} // namespace rec
