#pragma once

#include "salience/simulator.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace salience {

/// Flat INI-style configuration: `[section]` headers, `key = value` rows,
/// `#` comments. Section-less keys live under the empty section name.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t get_uint64(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const;

    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;
    const std::map<std::string, std::map<std::string, std::string>>& raw() const { return data_; }

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

/// A full simulation setup: population priors plus per-object sections; each
/// object may override the population priors (churn spread, decay horizon).
struct SimulationConfig {
    AgentPriors priors;
    std::vector<ObjectProfile> profiles;
    std::vector<AgentPriors> per_object_priors; // aligned with profiles
    int n_per_object = 1000;
};

/// Reads `[population]` plus one `[object.<name>]` section per game object.
SimulationConfig parse_simulation_config(const ConfigFile& cfg);

/// Six-object desk-scale default calibrated against published per-game
/// medians (sessions, absence, session time, active time, activity).
std::string default_simulation_config();

} // namespace salience
