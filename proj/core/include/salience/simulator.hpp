#pragma once

#include "salience/dataset.hpp"
#include "salience/telemetry.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace salience {

/// How the internal-state factor kappa reshapes the raw reward.
enum class RewardForm { kMultiplicative, kAdditive };

/// Rewarding characteristics of one game object plus the link from latent
/// salience to the four observable metric medians.
struct ObjectProfile {
    std::string object_id;
    double base_reward = 1.0;
    double reward_decay = 1.0; // per-session multiplicative decay (content exhaustion)
    double noise_sd = 0.0;     // log-normal sigma for emissions and reward draws
    std::array<double, kNumMetrics> behaviour_gain{};  // link slope per metric
    std::array<double, kNumMetrics> target_medians{};  // calibration medians
    double calibration_v = 1.0; // latent level at which the noise-free link hits the medians
    std::array<double, kNumMetrics> link_offset{};     // solved at construction

    /// Solves link offsets so that the noise-free link maps calibration_v
    /// onto target_medians (absence decreasing in V, the rest increasing).
    static ObjectProfile calibrated(std::string object_id, double base_reward,
                                    double reward_decay, double noise_sd,
                                    std::array<double, kNumMetrics> behaviour_gain,
                                    std::array<double, kNumMetrics> target_medians,
                                    double calibration_v);

    void validate() const;
};

/// One agent's TD-learning state for a single (individual, object) pair.
struct AgentState {
    double v = 0.0;             // current attributed salience estimate
    double kappa = 1.0;         // internal-state modulation, > 0
    double alpha = 0.1;         // learning rate in (0, 1]
    double gamma = 0.9;         // discount in [0, 1)
    double churn_threshold = 0.0;

    void validate() const;
};

/// kappa > 1 enhances the experienced reward, kappa < 1 dampens it; the
/// additive form uses r + ln(kappa) so kappa = 1 is neutral in both.
double modulated_reward(double r, double kappa, RewardForm form);

/// One TD(0) step with the single-state simplification V(s_{t+1}) = V(s_t):
/// delta = r_mod + gamma * V - V, then V <- V + alpha * delta.
AgentState td_update(const AgentState& state, double r_mod);

/// Draws one session whose metric medians follow the latent level:
/// metric = softplus(offset + gain * V) * exp(noise_sd * xi), active_time
/// clipped to [0, 100], absence decreasing in V (0 for the first session).
TelemetrySession emit_session(const AgentState& state, const ObjectProfile& profile,
                              std::mt19937_64& rng, bool first_session = false);

/// Population-level draws for the per-agent state.
struct AgentPriors {
    double kappa_log_sd = 0.5;   // kappa ~ LogNormal(0, sd)
    double alpha_min = 0.2;
    double alpha_max = 0.5;
    double gamma = 0.9;
    double churn_min = 0.05;     // threshold ~ Uniform(min, max), as fraction of
    double churn_max = 0.35;     //   the kappa=1 fixpoint base_reward/(1-gamma)
    double init_v_fraction = 0.12; // V0 as fraction of the kappa-scaled fixpoint
    int max_sessions = 14;
    RewardForm form = RewardForm::kMultiplicative;

    AgentState draw(std::mt19937_64& rng, const ObjectProfile& profile) const;
};

/// Runs emit / reward draw / TD update until churn (V below threshold) or
/// max_sessions; the latent trace records V at each emission.
InteractionSequence simulate_agent(const ObjectProfile& profile, AgentState init,
                                   int max_sessions, std::mt19937_64& rng,
                                   RewardForm form = RewardForm::kMultiplicative);

/// Deterministic population: each agent owns an RNG stream derived from
/// (seed, agent index), so results do not depend on evaluation order.
Dataset simulate_population(const std::vector<ObjectProfile>& profiles,
                            const AgentPriors& priors, int n_per_object,
                            std::uint64_t seed);

/// Per-object priors (aligned with profiles), for calibrating lifetime
/// distributions object by object.
Dataset simulate_population(const std::vector<ObjectProfile>& profiles,
                            const std::vector<AgentPriors>& priors, int n_per_object,
                            std::uint64_t seed);

double softplus(double x);
double softplus_inverse(double y);

} // namespace salience
