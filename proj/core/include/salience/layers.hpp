#pragma once

#include "salience/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace salience::nn {

/// A parameter tensor paired with its gradient accumulator.
struct Params {
    std::string name;
    Tensor value;
    Tensor grad;

    Params() = default;
    Params(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
    void zero_grad() { grad.zero(); }
};

enum class Activation { kLinear, kRelu, kSoftplus };

double apply_activation(Activation act, double x);
double activation_grad(Activation act, double pre, double post);

/// Differentiable layer: backward consumes exactly what the matching forward
/// cached and accumulates parameter gradients.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Params*> params() { return {}; }
    virtual const std::string& name() const = 0;
    virtual std::size_t param_count() const;
};

/// activation(x W + b); accepts [n, in] or [n, T, in] (leading dims flattened).
class DenseLayer final : public Layer {
public:
    DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act);

    void init_params(std::mt19937_64& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Params*> params() override { return {&weight_, &bias_}; }
    const std::string& name() const override { return name_; }

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }
    static std::size_t param_count(std::size_t in, std::size_t out) { return in * out + out; }

    Params weight_; // [in, out]
    Params bias_;   // [out]

private:
    std::string name_;
    std::size_t in_, out_;
    Activation act_;
    Tensor cached_input_;  // flattened [N, in]
    Tensor cached_pre_;    // [N, out]
    Tensor cached_post_;   // [N, out]
    std::vector<std::size_t> cached_shape_;
};

/// Row lookup for categorical ids, broadcast across sequence steps; backward
/// scatters gradients into touched rows only.
class EmbeddingLayer final {
public:
    EmbeddingLayer(std::string name, std::size_t vocab, std::size_t dim);

    void init_params(std::mt19937_64& rng);
    /// [n] ids -> [n, steps, dim] (the object is constant over a sequence).
    Tensor forward(const std::vector<int>& ids, std::size_t steps);
    void backward(const Tensor& grad_out);
    std::vector<Params*> params() { return {&table_}; }
    const std::string& name() const { return name_; }
    std::size_t vocab() const { return vocab_; }
    std::size_t dim() const { return dim_; }
    static std::size_t param_count(std::size_t vocab, std::size_t dim) { return vocab * dim; }

    Params table_; // [vocab, dim]

private:
    std::string name_;
    std::size_t vocab_, dim_;
    std::vector<int> cached_ids_;
};

/// Standard LSTM cell (forget/input/output gates, tanh candidate, no
/// peepholes); forward caches every per-step activation for full BPTT.
class LstmLayer final : public Layer {
public:
    LstmLayer(std::string name, std::size_t in, std::size_t hidden);

    void init_params(std::mt19937_64& rng); // forget-gate bias starts at 1

    /// x [n, T, in] -> h sequence [n, T, hidden]; zero initial state.
    Tensor forward(const Tensor& x) override;
    /// Optional explicit initial state (h0, c0 each [n, hidden]).
    Tensor forward(const Tensor& x, const Tensor& h0, const Tensor& c0);
    Tensor backward(const Tensor& grad_hseq) override;

    std::vector<Params*> params() override { return {&w_input_, &w_recurrent_, &bias_}; }
    const std::string& name() const override { return name_; }
    std::size_t hidden_dim() const { return hidden_; }
    static std::size_t param_count(std::size_t in, std::size_t hidden) {
        return 4 * hidden * (in + hidden + 1);
    }

    Params w_input_;     // [in, 4*hidden], gate order (i, f, g, o)
    Params w_recurrent_; // [hidden, 4*hidden]
    Params bias_;        // [4*hidden]

private:
    std::string name_;
    std::size_t in_, hidden_;
    // BPTT cache
    Tensor cached_x_;        // [n, T, in]
    Tensor cached_gates_;    // [n, T, 4h] activated (i, f, g, o)
    Tensor cached_c_;        // [n, T, h]
    Tensor cached_tanh_c_;   // [n, T, h]
    Tensor cached_h_;        // [n, T, h]
    Tensor cached_h0_, cached_c0_;
    bool has_cache_ = false;
};

/// Five task heads off the shared representation: one linear unit per
/// continuous target and a softplus unit for the future session count.
class HeadLayer final : public Layer {
public:
    HeadLayer(std::string name, std::size_t in, std::vector<Activation> acts);

    void init_params(std::mt19937_64& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Params*> params() override { return {&weight_, &bias_}; }
    const std::string& name() const override { return name_; }
    std::size_t out_dim() const { return acts_.size(); }

    Params weight_; // [in, out]
    Params bias_;   // [out]

private:
    std::string name_;
    std::size_t in_;
    std::vector<Activation> acts_;
    Tensor cached_input_, cached_pre_, cached_post_;
    std::vector<std::size_t> cached_shape_;
};

/// Concatenate along the last axis ([n, T, a] + [n, T, b] -> [n, T, a+b]).
Tensor concat_last(const Tensor& a, const Tensor& b);
/// Split a gradient back into the two concatenated parts.
std::pair<Tensor, Tensor> split_last(const Tensor& g, std::size_t a_dim);

} // namespace salience::nn
