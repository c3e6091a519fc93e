#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace qglab {

// Flat key=value config; '#' starts a comment, whitespace is trimmed.
class Config {
  public:
    Config() = default;
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double def) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long def) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    // FNV-1a over the sorted canonical "key=value\n" lines, hex string.
    std::string hash() const;

    const std::map<std::string, std::string>& items() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 1469598103934665603ull);

}  // namespace qglab
