#include "salience/config.hpp"

#include "salience/common.hpp"

#include <fstream>
#include <sstream>

namespace salience {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            cfg.data_[section]; // section may stay empty
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(line_no));
        cfg.data_[section][key] = value;
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    return s != data_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s == data_.end()) throw ConfigError("missing config section [" + section + "]");
    auto k = s->second.find(key);
    if (k == s->second.end())
        throw ConfigError("missing config key '" + key + "' in [" + section + "]");
    return k->second;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return std::stod(get(section, key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' in [" + section + "] is not a number");
    }
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return std::stoi(get(section, key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' in [" + section + "] is not an integer");
    }
}

std::uint64_t ConfigFile::get_uint64(const std::string& section, const std::string& key,
                                     std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return std::stoull(get(section, key));
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' in [" + section + "] is not an integer");
    }
}

std::vector<std::string> ConfigFile::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, kv] : data_)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

SimulationConfig parse_simulation_config(const ConfigFile& cfg) {
    SimulationConfig sim;
    const std::string pop = "population";
    sim.n_per_object = cfg.get_int(pop, "n_per_object", 1000);
    if (sim.n_per_object < 1) throw ConfigError("n_per_object must be >= 1");

    AgentPriors base;
    base.kappa_log_sd = cfg.get_double(pop, "kappa_log_sd", base.kappa_log_sd);
    base.alpha_min = cfg.get_double(pop, "alpha_min", base.alpha_min);
    base.alpha_max = cfg.get_double(pop, "alpha_max", base.alpha_max);
    base.gamma = cfg.get_double(pop, "gamma", base.gamma);
    base.churn_min = cfg.get_double(pop, "churn_min", base.churn_min);
    base.churn_max = cfg.get_double(pop, "churn_max", base.churn_max);
    base.init_v_fraction = cfg.get_double(pop, "init_v_fraction", base.init_v_fraction);
    base.max_sessions = cfg.get_int(pop, "max_sessions", base.max_sessions);
    std::string form = cfg.get_or(pop, "reward_form", "multiplicative");
    if (form == "multiplicative") {
        base.form = RewardForm::kMultiplicative;
    } else if (form == "additive") {
        base.form = RewardForm::kAdditive;
    } else {
        throw ConfigError("reward_form must be multiplicative or additive");
    }
    sim.priors = base;

    auto sections = cfg.sections_with_prefix("object.");
    if (sections.empty()) throw ConfigError("simulation config has no [object.*] sections");
    for (const auto& section : sections) {
        std::string name = section.substr(std::string("object.").size());
        if (name.empty()) throw ConfigError("object section with empty name");

        double base_reward = cfg.get_double(section, "base_reward", 1.0);
        double decay = cfg.get_double(section, "reward_decay", 1.0);
        double noise = cfg.get_double(section, "noise_sd", 0.0);
        double calibration_v = cfg.get_double(section, "calibration_v", 1.0);
        std::array<double, kNumMetrics> gains{};
        std::array<double, kNumMetrics> medians{};
        static const char* gain_keys[kNumMetrics] = {"gain_absence", "gain_session_time",
                                                     "gain_active_time", "gain_activity"};
        static const char* median_keys[kNumMetrics] = {"median_absence", "median_session_time",
                                                       "median_active_time", "median_activity"};
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            gains[m] = cfg.get_double(section, gain_keys[m], 1.0);
            medians[m] = cfg.get_double(section, median_keys[m], 1.0);
        }
        sim.profiles.push_back(ObjectProfile::calibrated(name, base_reward, decay, noise, gains,
                                                         medians, calibration_v));

        AgentPriors prior = base; // per-object overrides of the population priors
        prior.kappa_log_sd = cfg.get_double(section, "kappa_log_sd", base.kappa_log_sd);
        prior.alpha_min = cfg.get_double(section, "alpha_min", base.alpha_min);
        prior.alpha_max = cfg.get_double(section, "alpha_max", base.alpha_max);
        prior.gamma = cfg.get_double(section, "gamma", base.gamma);
        prior.churn_min = cfg.get_double(section, "churn_min", base.churn_min);
        prior.churn_max = cfg.get_double(section, "churn_max", base.churn_max);
        prior.init_v_fraction = cfg.get_double(section, "init_v_fraction", base.init_v_fraction);
        prior.max_sessions = cfg.get_int(section, "max_sessions", base.max_sessions);
        sim.per_object_priors.push_back(prior);
    }
    return sim;
}

std::string default_simulation_config() {
    // Medians follow the six published game profiles; decay and churn spreads
    // are tuned so per-object median sequence lengths land on 3/8/7/5/4/4.
    return R"(# Desk-scale simulated population, six game objects.
[population]
n_per_object = 1000
kappa_log_sd = 0.5
alpha_min = 0.3
alpha_max = 0.6
gamma = 0.6
churn_min = 0.10
churn_max = 0.35
init_v_fraction = 0.30
max_sessions = 16
reward_form = multiplicative

[object.hmg]
base_reward = 1.0
reward_decay = 0.10
noise_sd = 0.40
churn_min = 0.34
churn_max = 0.75
calibration_v = 1.49
median_absence = 1.4
median_session_time = 22
median_active_time = 64
median_activity = 25
gain_absence = 0.55
gain_session_time = 5.5
gain_active_time = 8.0
gain_activity = 6.0

[object.hms]
base_reward = 1.0
reward_decay = 0.30
noise_sd = 0.40
churn_min = 0.10
churn_max = 0.22
calibration_v = 0.76
median_absence = 0.4
median_session_time = 28
median_active_time = 42
median_activity = 6
gain_absence = 0.25
gain_session_time = 7.0
gain_active_time = 6.0
gain_activity = 1.5

[object.jc3]
base_reward = 1.0
reward_decay = 0.10
noise_sd = 0.40
churn_min = 0.10
churn_max = 0.22
calibration_v = 0.73
median_absence = 1.07
median_session_time = 162
median_active_time = 60
median_activity = 19
gain_absence = 0.45
gain_session_time = 40.0
gain_active_time = 7.0
gain_activity = 4.5

[object.jc4]
base_reward = 1.0
reward_decay = 0.10
noise_sd = 0.40
churn_min = 0.18
churn_max = 0.40
calibration_v = 1.02
median_absence = 1.07
median_session_time = 133
median_active_time = 43
median_activity = 46
gain_absence = 0.45
gain_session_time = 33.0
gain_active_time = 6.0
gain_activity = 11.0

[object.lis]
base_reward = 1.0
reward_decay = 0.10
noise_sd = 0.40
churn_min = 0.26
churn_max = 0.57
calibration_v = 1.26
median_absence = 2.38
median_session_time = 96
median_active_time = 48
median_activity = 40
gain_absence = 0.75
gain_session_time = 24.0
gain_active_time = 6.0
gain_activity = 10.0

[object.lisbf]
base_reward = 1.0
reward_decay = 0.10
noise_sd = 0.40
churn_min = 0.26
churn_max = 0.57
calibration_v = 1.26
median_absence = 1.18
median_session_time = 102
median_active_time = 79
median_activity = 23
gain_absence = 0.50
gain_session_time = 25.0
gain_active_time = 5.0
gain_activity = 5.5
)";
}

} // namespace salience
