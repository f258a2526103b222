#pragma once

#include "salience/dataset.hpp"
#include "salience/models.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace salience {

struct TrainConfig {
    int max_epochs = 200;
    double early_stop_min_delta = 1e-4;
    int patience = 10;
    double holdout_fraction = 0.2;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

/// Disjoint agent-level split; the first part holds round(fraction * n)
/// sequences. Deterministic per seed.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed);

struct FitResult {
    std::vector<double> train_loss;
    std::vector<double> holdout_loss;
    int best_epoch = 0;
    double best_holdout = 0.0;
    int epochs_run = 0;
};

/// Patience counter over a monitored loss: an epoch counts as an improvement
/// only when it beats the best tracked value by at least min_delta; after
/// `patience` consecutive non-improvements observe() returns true (stop).
class EarlyStopper {
public:
    EarlyStopper(double min_delta, int patience)
        : min_delta_(min_delta), patience_(patience) {}

    bool observe(double loss) {
        if (loss < best_ - min_delta_) {
            best_ = loss;
            wait_ = 0;
            return false;
        }
        return ++wait_ >= patience_;
    }
    double best() const { return best_; }

private:
    double min_delta_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int wait_ = 0;
};

/// Adam on the summed 5-target SMAPE with early stopping on an agent-level
/// holdout; restores the best-holdout parameters before returning.
FitResult fit(NetworkModel& model, const Dataset& train, const TrainConfig& cfg);

/// Training-space loss (summed 5-target SMAPE) of a model over a dataset.
double evaluate_loss(NetworkModel& model, const Dataset& data, const ScalingStats& stats,
                     std::size_t batch_size);

// ---------------------------------------------------------------------------
// Hyperband
// ---------------------------------------------------------------------------

struct Rung {
    int n_configs = 0;
    int epochs = 0;
};
using Bracket = std::vector<Rung>;

/// One full Hyperband iteration: one successive-halving bracket per
/// aggressiveness level s = s_max .. 0, every bracket finishing at the full
/// budget.
std::vector<Bracket> hyperband_brackets(int budget_epochs, int eta);

/// Generic search over a finite space; `evaluate(spec, epochs)` returns the
/// holdout loss after training that configuration for that many epochs.
ModelSpec hyperband_search(const std::vector<ModelSpec>& space, int budget_epochs, int eta,
                           std::uint64_t seed,
                           const std::function<double(const ModelSpec&, int)>& evaluate);

/// Hyperband over real training runs on the tuning set; candidates share one
/// 20% tuning holdout for scoring.
ModelSpec tune_model(const std::vector<ModelSpec>& space, const Dataset& tuning,
                     int budget_epochs, const TrainConfig& base, int eta = 3);

/// The shared desk-scale grid: layers {1,2,3} x units {32,64,128} x
/// embedding {4,8,16} x lr {1e-3, 3e-4}; the elastic net swaps depth for an
/// l1 = l2 penalty grid so every kind enjoys equal tuning freedom.
std::vector<ModelSpec> default_search_space(ModelKind kind);

// ---------------------------------------------------------------------------
// Cross-validation and comparison
// ---------------------------------------------------------------------------

struct EvalCell {
    ModelKind model;
    int fold = 0;
    int object_id = 0;
    int timestep = 0; // 1-based input step
    int target = 0;   // index into kTargetNames
    double smape = 0.0;
};

/// Deterministic object-stratified fold labels, one per sequence.
std::vector<int> assign_folds(const Dataset& data, int k, std::uint64_t seed);

/// Agent-level folds stratified by object; scaling and baseline fits are
/// re-learned per training fold; cells are SMAPE in original units per
/// (fold, object, timestep, target).
std::vector<EvalCell> cross_validate(const ModelSpec& spec, const Dataset& validation, int k,
                                     const TrainConfig& cfg);

/// Per-sequence original-unit predictions for any model kind (steps 1..T-1).
std::vector<std::vector<std::array<double, kNumTargets>>> predict_original(
    const ModelSpec& spec, NetworkModel* network, const MedianModel* median,
    const Dataset& data, const ScalingStats& stats, std::size_t batch_size);

void write_eval_cells(const std::string& path, const std::vector<EvalCell>& cells,
                      const std::vector<std::string>& object_names);
std::vector<EvalCell> read_eval_cells(const std::string& path,
                                      std::vector<std::string>& object_names);

struct ModelSummary {
    ModelKind kind;
    double mean_global = 0.0;                    // mean over folds of fold-level global SMAPE
    std::array<double, kNumTargets> per_target{};
    std::vector<double> fold_global;
};

struct PairedComparison {
    ModelKind first, second;
    double mean_difference = 0.0; // first - second, fold-level global
    int first_wins = 0;
    int second_wins = 0;
    int ties = 0;
};

struct ComparisonReport {
    std::vector<ModelSummary> ranking; // ascending mean_global (best first)
    std::vector<PairedComparison> paired;
};

/// Requires every model kind to carry the same fold set.
ComparisonReport compare_models(const std::vector<EvalCell>& cells);

/// True when the ranking matches `best_to_worst` exactly.
bool ordering_satisfied(const ComparisonReport& report, const std::vector<ModelKind>& best_to_worst);

} // namespace salience
