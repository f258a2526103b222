#pragma once

#include "salience/adam.hpp"
#include "salience/dataset.hpp"
#include "salience/layers.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace salience {

enum class ModelKind { kLag1, kMedian, kElasticNet, kMlp, kRnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
inline constexpr std::array<ModelKind, 5> kAllModelKinds = {
    ModelKind::kLag1, ModelKind::kMedian, ModelKind::kElasticNet, ModelKind::kMlp,
    ModelKind::kRnn};

/// Architecture and optimizer hyperparameters for one predictor.
struct ModelSpec {
    ModelKind kind = ModelKind::kRnn;
    int layers = 1;        // trunk depth (dense layers or stacked LSTM cells)
    int units = 32;        // trunk width; also the shared representation width h
    int embedding_dim = 8;
    double l1 = 0.0;       // elastic net only
    double l2 = 0.0;
    double learning_rate = 1e-3;
    double median_halflife = 1.0; // median baseline only

    void validate() const;
    std::string describe() const;
};

// ---------------------------------------------------------------------------
// SMAPE
// ---------------------------------------------------------------------------

/// 100 * mean |y - yhat| / (|y| + |yhat|), the 0/0 term defined as 0.
double smape(const nn::Tensor& y, const nn::Tensor& yhat);
double smape(std::span<const double> y, std::span<const double> yhat);

/// Training objective: per-target SMAPE summed over the 5 targets
/// ([..., 5] tensors). The reported metric is this sum divided by 5.
double multitask_smape(const nn::Tensor& y, const nn::Tensor& yhat);
nn::Tensor multitask_smape_grad(const nn::Tensor& y, const nn::Tensor& yhat);

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

/// Dense same-length batch: scaled inputs [n, T, 4], targets [n, T, 5]
/// (four scaled lead-1 metrics plus the raw future session count).
struct BatchTensors {
    std::vector<int> object_ids;
    nn::Tensor x;
    nn::Tensor y;
    std::vector<std::size_t> sequence_indices;

    std::size_t batch() const { return object_ids.size(); }
    std::size_t steps() const { return x.rank() == 3 ? x.dim(1) : 0; }
};

BatchTensors make_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                        const ScalingStats& stats);

// ---------------------------------------------------------------------------
// Parametric models (elastic net, MLP, RNN)
// ---------------------------------------------------------------------------

struct ForwardResult {
    nn::Tensor prediction;     // [n, T, 5] in training (scaled) space
    nn::Tensor representation; // [n, T, h]; empty for the elastic net
};

/// Shared-trunk multi-task network. The elastic net is a single linear trunk,
/// the MLP a ReLU stack, the RNN an LSTM stack; MLP and RNN end in the shared
/// dense representation layer feeding five heads (linear x4, softplus count).
class NetworkModel {
public:
    NetworkModel(ModelSpec spec, std::size_t vocab, std::uint64_t init_seed);

    ForwardResult forward(const BatchTensors& batch);
    /// Encoder path only (embedding -> trunk -> representation), no heads.
    nn::Tensor representation(const BatchTensors& batch);
    /// Chain-rule pass from d loss / d prediction; adds elastic-net penalty
    /// gradients when the spec carries l1/l2.
    void backward(const nn::Tensor& grad_prediction);

    std::vector<nn::Params*> params();
    std::vector<nn::Params*> encoder_params(); // everything before the heads
    std::vector<nn::Params*> penalized_weights();
    void zero_grads();

    std::size_t param_count() const;
    std::size_t encoder_param_count() const;
    static std::size_t param_count(const ModelSpec& spec, std::size_t vocab);

    std::vector<nn::Tensor> snapshot_params() const;
    void restore_params(const std::vector<nn::Tensor>& snapshot);

    const ModelSpec& spec() const { return spec_; }
    std::size_t vocab() const { return embedding_->vocab(); }

private:
    ModelSpec spec_;
    std::unique_ptr<nn::EmbeddingLayer> embedding_;
    std::vector<std::unique_ptr<nn::Layer>> trunk_;
    std::unique_ptr<nn::DenseLayer> representation_; // null for elastic net
    std::unique_ptr<nn::HeadLayer> heads_;
    std::size_t input_dim_ = 0;
};

/// Full objective for the elastic net: multitask SMAPE plus the l1/l2
/// penalty over trunk and head weight matrices (biases excluded).
double elastic_net_loss(NetworkModel& model, const BatchTensors& batch);

/// Encoder: copy of all transformations up to the shared representation
/// layer. Rejected for baselines and the elastic net.
class Encoder {
public:
    Encoder(ModelSpec spec, std::size_t vocab);

    nn::Tensor encode(const BatchTensors& batch) const;
    std::size_t param_count() const;
    const ModelSpec& spec() const;
    NetworkModel& network() { return *net_; }
    const NetworkModel& network() const { return *net_; }

private:
    mutable std::unique_ptr<NetworkModel> net_;
};

Encoder extract_encoder(const NetworkModel& model);

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Lag-1 rule: each continuous target predicted by its current value, the
/// future session count by the constant 1. Original units, steps 1..T-1.
std::vector<std::array<double, kNumTargets>> lag1_predict(const InteractionSequence& seq);

/// Exponentially weighted per-agent averages of each target, collapsed to a
/// per-object median used as a constant prediction.
class MedianModel {
public:
    explicit MedianModel(double halflife = 1.0);

    void fit(const Dataset& train);
    std::array<double, kNumTargets> predict(int object_id) const;
    double halflife() const { return halflife_; }
    const std::map<int, std::array<double, kNumTargets>>& medians() const { return medians_; }

private:
    double halflife_;
    std::map<int, std::array<double, kNumTargets>> medians_;
};

} // namespace salience
