#pragma once

#include "salience/telemetry.hpp"
#include "salience/tensor.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace salience {

// ---------------------------------------------------------------------------
// Principal components
// ---------------------------------------------------------------------------

struct PcaResult {
    std::vector<double> explained; // per-component variance fractions, descending
    std::vector<double> mean;      // feature means [d]
    nn::Tensor components;         // [d, n_components], unit-norm columns
};

/// Eigen-decomposition of the centered covariance of [n, d] points.
PcaResult pca_explained_variance(const nn::Tensor& points, int n_components);

/// Scores of every point on one principal component (0-based).
std::vector<double> pca_scores(const PcaResult& pca, const nn::Tensor& points, int component);

// ---------------------------------------------------------------------------
// Neighbor embedding (UMAP-family)
// ---------------------------------------------------------------------------

struct EmbedConfig {
    int n_neighbors = 50;
    double min_dist = 0.8;
    int epochs = 2000;
    double spread = 1.0;
    double learning_rate = 1.0;
    int negative_samples = 5;
    std::uint64_t seed = 0;
};

struct EmbeddingResult {
    nn::Tensor points; // [n, 2]
    int source_step = 1;
    std::vector<std::string> agents; // alignment lineage (may be empty)
};

/// k-NN graph under cosine distance, fuzzy edge weights with per-point
/// bandwidth calibration, then SGD on attractive/repulsive forces in 2-D.
/// Deterministic for a fixed seed; single-threaded by design.
EmbeddingResult neighbor_embed(const nn::Tensor& points, const EmbedConfig& cfg);

struct SteppedPoints {
    nn::Tensor points;
    std::vector<std::string> agents;
};

/// Embeds each step, warm-starting step t+1 from step t's coordinates for
/// shared agents so per-agent trajectories stay comparable.
std::vector<EmbeddingResult> aligned_embed(const std::vector<SteppedPoints>& steps,
                                           const EmbedConfig& cfg);

// ---------------------------------------------------------------------------
// Dependence measures
// ---------------------------------------------------------------------------

struct MicOptions {
    double exponent = 0.6; // grid cap B(n) = n^exponent
    int clump_scale = 5;   // superclumps per column budget
};

struct MicResult {
    double value = 0.0;
    bool degenerate = false; // constant input
};

/// Maximal information coefficient: normalized mutual information maximized
/// over grids (y equipartition, dynamic programming on the x axis), both
/// orientations. Requires at least 20 points.
MicResult mic(std::span<const double> x, std::span<const double> y, MicOptions opts = {});

double spearman_rho(std::span<const double> x, std::span<const double> y);

/// sum_{i >= from_step} gamma^(i - from_step) * preds[i]; steps are 1-based.
double discounted_future_sum(std::span<const double> preds, double gamma, std::size_t from_step);

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

struct KMeansResult {
    nn::Tensor centroids; // [k, d]
    std::vector<int> assignments;
    double inertia = 0.0;
};

/// Best-of-restarts mini-batch k-means with per-centroid learning rate
/// 1/count; inertia is the full-dataset sum of squared distances.
KMeansResult minibatch_kmeans(const nn::Tensor& points, int k, std::size_t batch_size,
                              int n_init, int max_epochs, std::uint64_t seed);

struct ElbowResult {
    int k = 0;
    bool has_knee = false;
};

/// Maximum vertical distance from the chord of the axis-normalized inertia
/// curve; flags curves with no knee and falls back to the smallest k.
ElbowResult elbow(const std::vector<std::pair<int, double>>& inertia_curve);

struct ProfileCell {
    double mean_z = 0.0;
    double half_width = 0.0;
    std::size_t n = 0;
};

struct PartitionProfiles {
    std::vector<int> partitions; // non-empty partition labels, ascending
    // cells[p][metric][t]
    std::vector<std::array<std::vector<ProfileCell>, kNumMetrics>> cells;
    std::size_t max_steps = 0;
    std::size_t dropped_partitions = 0;
};

/// Per metric and session index, z-scores against the population of the
/// passed sequences (one object), averaged within each partition.
PartitionProfiles partition_profiles(const std::vector<InteractionSequence>& seqs,
                                     const std::vector<int>& assignments);

struct PartitionReport {
    int k = 0;
    std::vector<int> assignments;
    std::vector<std::pair<int, double>> inertia_curve;
    int elbow_k = 0;
    bool has_knee = false;
    PartitionProfiles profiles;
};

// ---------------------------------------------------------------------------
// Unit transducers
// ---------------------------------------------------------------------------

struct TransducerCurve {
    std::vector<double> bin_center, bin_mean, bin_sem;
    std::vector<std::size_t> bin_count;
    double mic_value = 0.0;
    double spearman = 0.0;
    int bins_used = 0;
    bool reduced = false; // fewer distinct activations than requested bins
};

/// Equal-width bins over a unit's activation with the mean and standard error
/// of the discounted prediction per bin.
TransducerCurve unit_transducer(std::span<const double> activation,
                                std::span<const double> prediction, int n_bins);

// ---------------------------------------------------------------------------
// Cluster quality helpers
// ---------------------------------------------------------------------------

/// Mean silhouette coefficient under euclidean distance.
double silhouette(const nn::Tensor& points, const std::vector<int>& labels);

/// Columns of [n, d] standardized to zero mean, unit variance.
nn::Tensor standardize_columns(const nn::Tensor& points);

} // namespace salience
