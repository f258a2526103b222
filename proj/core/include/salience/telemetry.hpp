#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace salience {

/// Index of each continuous behavioural metric inside 4-vectors.
enum Metric : std::size_t {
    kAbsence = 0,        // hours since the previous session (0 for the first)
    kSessionTime = 1,    // minutes
    kActiveTime = 2,     // percent of session_time spent actively playing
    kSessionActivity = 3 // count of user-initiated actions
};
inline constexpr std::size_t kNumMetrics = 4;
inline constexpr std::array<const char*, kNumMetrics> kMetricNames = {
    "absence", "session_time", "active_time", "session_activity"};

/// One observed interaction between an agent and a game object.
struct TelemetrySession {
    double absence = 0.0;
    double session_time = 0.0;
    double active_time = 0.0;
    double session_activity = 0.0;

    double metric(std::size_t m) const {
        switch (m) {
            case kAbsence: return absence;
            case kSessionTime: return session_time;
            case kActiveTime: return active_time;
            default: return session_activity;
        }
    }
    void set_metric(std::size_t m, double v) {
        switch (m) {
            case kAbsence: absence = v; break;
            case kSessionTime: session_time = v; break;
            case kActiveTime: active_time = v; break;
            default: session_activity = v; break;
        }
    }
    bool valid() const;
};

/// Ordered sessions of one agent with one object. latent_trace carries the
/// simulator's ground-truth salience and is empty for observational data.
struct InteractionSequence {
    std::string agent_id;
    int object_id = 0;
    std::vector<TelemetrySession> sessions;
    std::vector<double> latent_trace;

    std::size_t length() const { return sessions.size(); }
};

/// Supervised target at input step t: session t+1's metrics plus the number
/// of sessions still to come after t.
struct TargetVector {
    double next_absence = 0.0;
    double next_session_time = 0.0;
    double next_active_time = 0.0;
    double next_session_activity = 0.0;
    double future_session_count = 0.0;

    double metric(std::size_t m) const {
        switch (m) {
            case kAbsence: return next_absence;
            case kSessionTime: return next_session_time;
            case kActiveTime: return next_active_time;
            default: return next_session_activity;
        }
    }
};
inline constexpr std::size_t kNumTargets = 5;
inline constexpr std::array<const char*, kNumTargets> kTargetNames = {
    "next_absence", "next_session_time", "next_active_time",
    "next_session_activity", "future_session_count"};

/// Lead-1 targets for steps t = 1..T-1. Rejects sequences shorter than 2.
std::vector<TargetVector> build_targets(const InteractionSequence& seq);

} // namespace salience
