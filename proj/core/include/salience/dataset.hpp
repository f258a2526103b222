#pragma once

#include "salience/telemetry.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace salience {

struct FeatureStats {
    double min = 0.0;
    double max = 0.0;
};

/// Per-metric min/max learned on training data only.
struct ScalingStats {
    std::array<FeatureStats, kNumMetrics> metric{};

    double scale(std::size_t m, double x) const {
        const auto& s = metric[m];
        if (s.max <= s.min) return 0.0; // degenerate feature carries no information
        return (x - s.min) / (s.max - s.min);
    }
    double unscale(std::size_t m, double x) const {
        const auto& s = metric[m];
        if (s.max <= s.min) return s.min;
        return x * (s.max - s.min) + s.min;
    }
};

/// A population of sequences plus the ordinal object vocabulary (ids by first
/// appearance) and, once fitted, the training-split scaling statistics.
struct Dataset {
    std::vector<InteractionSequence> sequences;
    std::vector<std::string> objects;
    std::optional<ScalingStats> scaling;

    std::size_t size() const { return sequences.size(); }
    const std::string& object_name(int id) const { return objects.at(static_cast<std::size_t>(id)); }
    int intern_object(const std::string& name);

    Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Min/max over every session of every sequence, one entry per metric.
ScalingStats fit_scaling(const std::vector<InteractionSequence>& sequences);

std::vector<double> min_max_scale(const std::vector<double>& values, const ScalingStats& stats);
std::vector<double> min_max_unscale(const std::vector<double>& values, const ScalingStats& stats);

/// Drops every sequence containing a session metric strictly above the
/// per-object p-th percentile (nearest-rank over that object's values).
Dataset percentile_filter(const Dataset& data, double p);

/// Groups sequence indices into batches of constant sequence length, shuffled
/// deterministically by seed; the union covers the dataset exactly once.
std::vector<std::vector<std::size_t>> bucket_batches(const Dataset& data,
                                                     std::size_t batch_size,
                                                     std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Serialization: newline-delimited records, header row required.
//   agent_id,object_id,t,absence,session_time,active_time,session_activity[,latent_v]
// ---------------------------------------------------------------------------
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset_file(const std::string& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

// Scaling stats file: one `feature,min,max` row per feature.
void write_scaling_file(const std::string& path, const ScalingStats& stats);
ScalingStats read_scaling_file(const std::string& path);

} // namespace salience
