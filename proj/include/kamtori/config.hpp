#pragma once

// Flat key=value run configuration.  Keys use dotted sections (system.eps), values
// are plain text; '#' starts a comment anywhere on a line.  Later assignments win,
// which is what lets command-line overrides reuse set().  Every failure (missing
// file, malformed line, missing key, untypable value) is a ConfigError naming the
// offender.

#include <map>
#include <string>
#include <vector>

namespace kamtori {

class Config {
public:
    static Config parse_file(const std::string& path);
    // origin labels error messages (a file name, or "--set" for overrides).
    static Config parse_text(const std::string& text, const std::string& origin);

    // One assignment, last write wins.  "key=value" overrides go through set_pair.
    void set(const std::string& key, const std::string& value);
    void set_pair(const std::string& assignment, const std::string& origin);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    // Comma-separated lists.
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<int> get_ints(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

    // Sorted view for manifests and deterministic echoes.
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace kamtori
