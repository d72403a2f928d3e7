#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polytv {

/// Flat `key = value` configuration with `[section]` headers and `#` comments.
/// Keys inside a section are stored as `section.key`.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

    /// Keys starting with `prefix`, in lexicographic order.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace polytv
