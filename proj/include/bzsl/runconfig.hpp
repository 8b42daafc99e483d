#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bzsl/errors.hpp"

namespace bzsl {

// Flat key=value configuration. A key may be specified exactly once across
// the config file and command-line flags; duplicates are an error rather
// than a precedence rule.
class RunConfig {
public:
    RunConfig() = default;

    // Lines of "key=value"; blank lines and '#' comments ignored.
    static RunConfig from_file(const std::string& path);

    // Folds a flag value in; throws ConfigError("duplicate key <k>") if the
    // key was already set by the file or an earlier flag.
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    // Throws ConfigError naming the first unknown key.
    void require_known(const std::set<std::string>& allowed) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string get_required(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::optional<std::string> get_optional(const std::string& key) const;

    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

} // namespace bzsl
