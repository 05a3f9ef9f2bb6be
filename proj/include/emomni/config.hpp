// config.hpp : flat key=value run configuration with documented defaults
#pragma once

#include <map>
#include <string>
#include <vector>

namespace emomni {

// One entry in the default registry. Every tunable in the project appears
// here so a config file can be diffed against the full effective state.
struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string doc;
};

class RunConfig {
public:
    // Starts from the full default registry.
    RunConfig();

    // Sets an override. Unknown keys are rejected (typo protection).
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;          // comma separated
    std::vector<std::string> get_str_list(const std::string& key) const;  // comma separated

    // Full effective state as sorted `key = value` lines (checkpoint snapshot).
    std::string to_text() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

const std::vector<ConfigKey>& config_registry();

// Parses `key = value` lines ('#' comments, blank lines allowed) on top of the
// defaults. Unknown key or malformed line → invalid-argument with location.
RunConfig load_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Writes every key with its doc line, diff-friendly.
void save_config_file(const RunConfig& cfg, const std::string& path);

}  // namespace emomni
