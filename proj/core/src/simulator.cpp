#include "salience/simulator.hpp"

#include "salience/common.hpp"
#include "salience/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace salience {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
    if (y <= 0.0) throw DataError("softplus_inverse requires y > 0");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

void ObjectProfile::validate() const {
    if (reward_decay < 0.0 || reward_decay > 1.0)
        throw ConfigError("reward_decay must be in [0, 1] for object " + object_id);
    if (noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0 for object " + object_id);
    for (double m : target_medians)
        if (m <= 0.0) throw ConfigError("target medians must be positive for object " + object_id);
}

ObjectProfile ObjectProfile::calibrated(std::string object_id, double base_reward,
                                        double reward_decay, double noise_sd,
                                        std::array<double, kNumMetrics> behaviour_gain,
                                        std::array<double, kNumMetrics> target_medians,
                                        double calibration_v) {
    ObjectProfile p;
    p.object_id = std::move(object_id);
    p.base_reward = base_reward;
    p.reward_decay = reward_decay;
    p.noise_sd = noise_sd;
    p.behaviour_gain = behaviour_gain;
    p.target_medians = target_medians;
    p.calibration_v = calibration_v;
    p.validate();
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
        double signed_gain = (m == kAbsence) ? -behaviour_gain[m] : behaviour_gain[m];
        p.link_offset[m] = softplus_inverse(target_medians[m]) - signed_gain * calibration_v;
    }
    return p;
}

void AgentState::validate() const {
    if (kappa <= 0.0) throw DataError("kappa must be positive");
    if (alpha <= 0.0 || alpha > 1.0) throw DataError("alpha must be in (0, 1]");
    if (gamma < 0.0 || gamma >= 1.0) throw DataError("gamma must be in [0, 1)");
}

double modulated_reward(double r, double kappa, RewardForm form) {
    if (kappa <= 0.0) throw DataError("modulated_reward: kappa must be positive");
    if (form == RewardForm::kMultiplicative) return kappa * r;
    return r + std::log(kappa);
}

AgentState td_update(const AgentState& state, double r_mod) {
    AgentState next = state;
    // Single-state simplification: the value of the next state is the current
    // estimate itself, so delta reduces to r_mod - (1 - gamma) * V.
    double delta = r_mod + state.gamma * state.v - state.v;
    next.v = state.v + state.alpha * delta;
    return next;
}

TelemetrySession emit_session(const AgentState& state, const ObjectProfile& profile,
                              std::mt19937_64& rng, bool first_session) {
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    TelemetrySession s;
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
        double signed_gain = (m == kAbsence) ? -profile.behaviour_gain[m] : profile.behaviour_gain[m];
        double level = softplus(profile.link_offset[m] + signed_gain * state.v);
        if (profile.noise_sd > 0.0)
            level *= std::exp(profile.noise_sd * unit_normal(rng));
        s.set_metric(m, level);
    }
    if (first_session) s.absence = 0.0;
    s.active_time = std::clamp(s.active_time, 0.0, 100.0);
    s.session_activity = std::max(0.0, std::round(s.session_activity));
    return s;
}

AgentState AgentPriors::draw(std::mt19937_64& rng, const ObjectProfile& profile) const {
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    AgentState state;
    state.kappa = std::exp(kappa_log_sd * unit_normal(rng));
    state.alpha = alpha_min + (alpha_max - alpha_min) * unit(rng);
    state.gamma = gamma;
    double fixpoint = profile.base_reward / (1.0 - gamma);
    state.churn_threshold = (churn_min + (churn_max - churn_min) * unit(rng)) * fixpoint;
    state.v = init_v_fraction * state.kappa * fixpoint;
    state.validate();
    return state;
}

InteractionSequence simulate_agent(const ObjectProfile& profile, AgentState init,
                                   int max_sessions, std::mt19937_64& rng,
                                   RewardForm form) {
    if (max_sessions < 2) throw DataError("simulate_agent: max_sessions must be >= 2");
    init.validate();

    std::normal_distribution<double> unit_normal(0.0, 1.0);
    InteractionSequence seq;
    AgentState state = init;
    double reward_level = profile.base_reward;

    for (int t = 1; t <= max_sessions; ++t) {
        seq.sessions.push_back(emit_session(state, profile, rng, t == 1));
        seq.latent_trace.push_back(state.v);

        double r = reward_level;
        if (profile.noise_sd > 0.0) r *= std::exp(profile.noise_sd * unit_normal(rng));
        state = td_update(state, modulated_reward(r, state.kappa, form));
        reward_level *= profile.reward_decay;

        if (state.v < state.churn_threshold) break;
    }
    return seq;
}

Dataset simulate_population(const std::vector<ObjectProfile>& profiles,
                            const AgentPriors& priors, int n_per_object,
                            std::uint64_t seed) {
    return simulate_population(profiles,
                               std::vector<AgentPriors>(profiles.size(), priors),
                               n_per_object, seed);
}

Dataset simulate_population(const std::vector<ObjectProfile>& profiles,
                            const std::vector<AgentPriors>& priors, int n_per_object,
                            std::uint64_t seed) {
    if (n_per_object < 1) throw ConfigError("simulate_population: n_per_object must be >= 1");
    if (profiles.empty()) throw ConfigError("simulate_population: no object profiles");
    if (priors.size() != profiles.size())
        throw ConfigError("simulate_population: one priors entry per profile required");

    Dataset data;
    data.sequences.reserve(static_cast<std::size_t>(n_per_object) * profiles.size());

    for (std::size_t obj = 0; obj < profiles.size(); ++obj) {
        const ObjectProfile& profile = profiles[obj];
        const AgentPriors& prior = priors[obj];
        int object_id = data.intern_object(profile.object_id);
        for (int i = 0; i < n_per_object; ++i) {
            std::uint64_t stream = obj * static_cast<std::uint64_t>(n_per_object) + static_cast<std::uint64_t>(i);
            auto rng = make_engine(seed, stream);

            InteractionSequence seq;
            do { // resample agents that churn before producing two sessions
                AgentState init = prior.draw(rng, profile);
                seq = simulate_agent(profile, init, prior.max_sessions, rng, prior.form);
            } while (seq.length() < 2);

            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s-%06d", profile.object_id.c_str(), i);
            seq.agent_id = buf;
            seq.object_id = object_id;
            data.sequences.push_back(std::move(seq));
        }
    }
    return data;
}

} // namespace salience
