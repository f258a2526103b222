#include "salience/telemetry.hpp"

#include "salience/common.hpp"

#include <cmath>

namespace salience {

bool TelemetrySession::valid() const {
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
        double v = metric(m);
        if (!std::isfinite(v) || v < 0.0) return false;
    }
    return active_time <= 100.0;
}

std::vector<TargetVector> build_targets(const InteractionSequence& seq) {
    const std::size_t T = seq.length();
    if (T < 2) throw DataError("build_targets: sequence must have at least 2 sessions");

    std::vector<TargetVector> targets;
    targets.reserve(T - 1);
    for (std::size_t t = 1; t < T; ++t) {
        const TelemetrySession& next = seq.sessions[t];
        TargetVector tv;
        tv.next_absence = next.absence;
        tv.next_session_time = next.session_time;
        tv.next_active_time = next.active_time;
        tv.next_session_activity = next.session_activity;
        tv.future_session_count = static_cast<double>(T - t);
        targets.push_back(tv);
    }
    return targets;
}

} // namespace salience
