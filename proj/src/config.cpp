#include "kamtori/config.hpp"

#include <cctype>
#include <cerrno>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v.empty()) throw ConfigError("key '" + key + "' has an empty value");
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || errno == ERANGE)
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    return x;
}

int parse_int(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v.empty()) throw ConfigError("key '" + key + "' has an empty value");
    errno = 0;
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size() || errno == ERANGE || x < INT_MIN || x > INT_MAX)
        throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    return static_cast<int>(x);
}

std::vector<std::string> split_commas(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_text(text.str(), path);
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty() || key.find_first_of(" \t") != std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad key '" + key +
                              "'");
        cfg.set(key, trim(line.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void Config::set_pair(const std::string& assignment, const std::string& origin) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError(origin + ": expected key=value, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ": empty key in '" + assignment + "'");
    set(key, trim(assignment.substr(eq + 1)));
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const { return parse_int(key, get_string(key)); }

int Config::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_commas(get_string(key)))
        out.push_back(parse_double(key, item));
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
    return has(key) ? get_doubles(key) : fallback;
}

std::vector<int> Config::get_ints(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& item : split_commas(get_string(key)))
        out.push_back(parse_int(key, item));
    return out;
}

std::vector<int> Config::get_ints(const std::string& key,
                                  const std::vector<int>& fallback) const {
    return has(key) ? get_ints(key) : fallback;
}

}  // namespace kamtori
