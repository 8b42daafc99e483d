#include "bzsl/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace bzsl {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw ConfigError("key " + key + ": cannot parse '" + text + "' as a number");
    }
    return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
    long long v = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw ConfigError("key " + key + ": cannot parse '" + text + "' as an integer");
    }
    return v;
}

} // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              " is not key=value: " + text);
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + " has empty key");
        }
        if (cfg.values_.count(key)) throw ConfigError("duplicate key " + key);
        cfg.values_.emplace(key, value);
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (values_.count(key)) throw ConfigError("duplicate key " + key);
    values_.emplace(key, value);
}

void RunConfig::require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_) {
        if (!allowed.count(k)) throw ConfigError("unknown key " + k);
    }
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string RunConfig::get_required(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key " + key);
    return it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(key, it->second);
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return static_cast<int>(parse_integer(key, it->second));
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const long long v = parse_integer(key, it->second);
    if (v < 0) throw ConfigError("key " + key + " must be nonnegative");
    return static_cast<std::uint64_t>(v);
}

std::optional<std::string> RunConfig::get_optional(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    return parse_double_list(get_required(key));
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    return parse_int_list(get_required(key));
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(parse_double("list", t));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(static_cast<int>(parse_integer("list", t)));
    }
    return out;
}

} // namespace bzsl
