#include "salience/models.hpp"

#include "salience/common.hpp"
#include "salience/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace salience {

using nn::Activation;
using nn::Tensor;

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kLag1: return "lag1";
        case ModelKind::kMedian: return "median";
        case ModelKind::kElasticNet: return "elastic_net";
        case ModelKind::kMlp: return "mlp";
        case ModelKind::kRnn: return "rnn";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (ModelKind k : kAllModelKinds)
        if (to_string(k) == name) return k;
    throw ConfigError("unknown model kind: " + name);
}

void ModelSpec::validate() const {
    if (layers < 1) throw ConfigError("model spec: layers must be >= 1");
    if (units < 1) throw ConfigError("model spec: units must be >= 1");
    if (embedding_dim < 1) throw ConfigError("model spec: embedding_dim must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("model spec: learning_rate must be positive");
    if (l1 < 0.0 || l2 < 0.0) throw ConfigError("model spec: penalties must be non-negative");
    if (kind == ModelKind::kElasticNet && layers != 1)
        throw ConfigError("elastic net has exactly one linear trunk layer");
    if (kind == ModelKind::kMedian && median_halflife <= 0.0)
        throw ConfigError("median model: halflife must be positive");
}

std::string ModelSpec::describe() const {
    std::ostringstream os;
    os << to_string(kind) << "(layers=" << layers << ",units=" << units
       << ",emb=" << embedding_dim << ",lr=" << learning_rate;
    if (kind == ModelKind::kElasticNet) os << ",l1=" << l1 << ",l2=" << l2;
    if (kind == ModelKind::kMedian) os << ",halflife=" << median_halflife;
    os << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// SMAPE
// ---------------------------------------------------------------------------

namespace {

inline double smape_term(double y, double yhat) {
    double denom = std::abs(y) + std::abs(yhat);
    if (denom == 0.0) return 0.0;
    return std::abs(y - yhat) / denom;
}

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

// d/d yhat of |y - yhat| / (|y| + |yhat|); 0 when both are 0.
inline double smape_term_grad(double y, double yhat) {
    double denom = std::abs(y) + std::abs(yhat);
    if (denom == 0.0) return 0.0;
    double num = std::abs(y - yhat);
    return (-sgn(y - yhat) * denom - num * sgn(yhat)) / (denom * denom);
}

} // namespace

double smape(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw DataError("smape: shape mismatch");
    if (y.empty()) throw DataError("smape: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += smape_term(y[i], yhat[i]);
    return 100.0 * sum / static_cast<double>(y.size());
}

double smape(const Tensor& y, const Tensor& yhat) {
    if (!y.same_shape(yhat)) throw DataError("smape: shape mismatch");
    return smape(y.values(), yhat.values());
}

double multitask_smape(const Tensor& y, const Tensor& yhat) {
    if (!y.same_shape(yhat)) throw DataError("multitask_smape: shape mismatch");
    if (y.shape().back() != kNumTargets)
        throw DataError("multitask_smape: last dimension must hold the 5 targets");
    const std::size_t rows = y.size() / kNumTargets;
    std::array<double, kNumTargets> sums{};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < kNumTargets; ++k)
            sums[k] += smape_term(y[r * kNumTargets + k], yhat[r * kNumTargets + k]);
    double total = 0.0;
    for (double s : sums) total += 100.0 * s / static_cast<double>(rows);
    return total;
}

Tensor multitask_smape_grad(const Tensor& y, const Tensor& yhat) {
    if (!y.same_shape(yhat)) throw DataError("multitask_smape_grad: shape mismatch");
    const std::size_t rows = y.size() / kNumTargets;
    Tensor grad(y.shape());
    const double scale = 100.0 / static_cast<double>(rows);
    for (std::size_t i = 0; i < y.size(); ++i)
        grad[i] = scale * smape_term_grad(y[i], yhat[i]);
    return grad;
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

BatchTensors make_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                        const ScalingStats& stats) {
    if (indices.empty()) throw DataError("make_batch: empty index set");
    const std::size_t T = data.sequences.at(indices[0]).length();
    for (std::size_t i : indices)
        if (data.sequences.at(i).length() != T)
            throw DataError("make_batch: sequences of mixed length in one batch");
    if (T < 2) throw DataError("make_batch: sequences must have at least 2 sessions");

    const std::size_t n = indices.size();
    const std::size_t steps = T - 1; // inputs are sessions 1..T-1, targets lead-1
    BatchTensors b;
    b.sequence_indices = indices;
    b.object_ids.reserve(n);
    b.x = Tensor({n, steps, kNumMetrics});
    b.y = Tensor({n, steps, kNumTargets});

    for (std::size_t i = 0; i < n; ++i) {
        const InteractionSequence& seq = data.sequences[indices[i]];
        b.object_ids.push_back(seq.object_id);
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t m = 0; m < kNumMetrics; ++m) {
                b.x.at(i, t, m) = stats.scale(m, seq.sessions[t].metric(m));
                b.y.at(i, t, m) = stats.scale(m, seq.sessions[t + 1].metric(m));
            }
            b.y.at(i, t, kNumMetrics) = static_cast<double>(steps - t); // T - (t+1) + 1
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// NetworkModel
// ---------------------------------------------------------------------------

NetworkModel::NetworkModel(ModelSpec spec, std::size_t vocab, std::uint64_t init_seed)
    : spec_(spec) {
    spec_.validate();
    if (spec_.kind != ModelKind::kElasticNet && spec_.kind != ModelKind::kMlp &&
        spec_.kind != ModelKind::kRnn)
        throw ConfigError("NetworkModel: " + to_string(spec_.kind) + " is not a parametric network");
    if (vocab == 0) throw ConfigError("NetworkModel: empty object vocabulary");

    const auto e = static_cast<std::size_t>(spec_.embedding_dim);
    const auto u = static_cast<std::size_t>(spec_.units);
    input_dim_ = e + kNumMetrics;

    embedding_ = std::make_unique<nn::EmbeddingLayer>("embedding", vocab, e);

    std::size_t width = input_dim_;
    for (int l = 0; l < spec_.layers; ++l) {
        std::string lname = "trunk" + std::to_string(l);
        switch (spec_.kind) {
            case ModelKind::kElasticNet:
                trunk_.push_back(std::make_unique<nn::DenseLayer>(lname, width, u, Activation::kLinear));
                break;
            case ModelKind::kMlp:
                trunk_.push_back(std::make_unique<nn::DenseLayer>(lname, width, u, Activation::kRelu));
                break;
            default:
                trunk_.push_back(std::make_unique<nn::LstmLayer>(lname, width, u));
                break;
        }
        width = u;
    }
    if (spec_.kind != ModelKind::kElasticNet)
        representation_ = std::make_unique<nn::DenseLayer>("representation", width, u, Activation::kRelu);

    std::vector<Activation> head_acts(kNumTargets, Activation::kLinear);
    head_acts[kNumTargets - 1] = Activation::kSoftplus; // count head stays non-negative
    heads_ = std::make_unique<nn::HeadLayer>("heads", u, std::move(head_acts));

    auto rng = make_engine(init_seed, 0x6d6f64656cULL);
    embedding_->init_params(rng);
    for (auto& layer : trunk_) {
        if (auto* d = dynamic_cast<nn::DenseLayer*>(layer.get())) d->init_params(rng);
        if (auto* l = dynamic_cast<nn::LstmLayer*>(layer.get())) l->init_params(rng);
    }
    if (representation_) representation_->init_params(rng);
    heads_->init_params(rng);
}

ForwardResult NetworkModel::forward(const BatchTensors& batch) {
    Tensor rep = representation(batch);
    ForwardResult out;
    out.prediction = heads_->forward(rep);
    if (spec_.kind != ModelKind::kElasticNet) out.representation = std::move(rep);
    return out;
}

Tensor NetworkModel::representation(const BatchTensors& batch) {
    if (batch.x.rank() != 3 || batch.x.dim(2) != kNumMetrics)
        throw DataError("NetworkModel: batch inputs must be [n, T, 4]");
    Tensor emb = embedding_->forward(batch.object_ids, batch.steps());
    Tensor z = nn::concat_last(emb, batch.x);
    for (auto& layer : trunk_) z = layer->forward(z);
    if (representation_) z = representation_->forward(z);
    return z;
}

void NetworkModel::backward(const Tensor& grad_prediction) {
    Tensor g = heads_->backward(grad_prediction);
    if (representation_) g = representation_->backward(g);
    for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);
    auto [g_emb, g_x] = nn::split_last(g, embedding_->dim());
    embedding_->backward(g_emb); // input gradients are not needed further down

    if (spec_.kind == ModelKind::kElasticNet && (spec_.l1 > 0.0 || spec_.l2 > 0.0)) {
        for (nn::Params* w : penalized_weights()) {
            for (std::size_t i = 0; i < w->value.size(); ++i) {
                double v = w->value[i];
                w->grad[i] += spec_.l1 * ((v > 0.0) - (v < 0.0)) + 2.0 * spec_.l2 * v;
            }
        }
    }
}

std::vector<nn::Params*> NetworkModel::params() {
    auto out = encoder_params();
    for (nn::Params* p : heads_->params()) out.push_back(p);
    return out;
}

std::vector<nn::Params*> NetworkModel::encoder_params() {
    std::vector<nn::Params*> out;
    for (nn::Params* p : embedding_->params()) out.push_back(p);
    for (auto& layer : trunk_)
        for (nn::Params* p : layer->params()) out.push_back(p);
    if (representation_)
        for (nn::Params* p : representation_->params()) out.push_back(p);
    return out;
}

std::vector<nn::Params*> NetworkModel::penalized_weights() {
    std::vector<nn::Params*> out;
    for (auto& layer : trunk_)
        if (auto* d = dynamic_cast<nn::DenseLayer*>(layer.get())) out.push_back(&d->weight_);
    out.push_back(&heads_->weight_);
    return out;
}

void NetworkModel::zero_grads() {
    for (nn::Params* p : params()) p->zero_grad();
}

std::size_t NetworkModel::param_count() const {
    return param_count(spec_, embedding_->vocab());
}

std::size_t NetworkModel::encoder_param_count() const {
    std::size_t n = 0;
    for (nn::Params* p : const_cast<NetworkModel*>(this)->encoder_params()) n += p->value.size();
    return n;
}

std::size_t NetworkModel::param_count(const ModelSpec& spec, std::size_t vocab) {
    spec.validate();
    const auto e = static_cast<std::size_t>(spec.embedding_dim);
    const auto u = static_cast<std::size_t>(spec.units);
    const std::size_t d = e + kNumMetrics;

    std::size_t total = nn::EmbeddingLayer::param_count(vocab, e);
    std::size_t width = d;
    for (int l = 0; l < spec.layers; ++l) {
        if (spec.kind == ModelKind::kRnn)
            total += nn::LstmLayer::param_count(width, u);
        else
            total += nn::DenseLayer::param_count(width, u);
        width = u;
    }
    if (spec.kind != ModelKind::kElasticNet) total += nn::DenseLayer::param_count(u, u);
    total += nn::DenseLayer::param_count(u, kNumTargets); // heads
    return total;
}

std::vector<Tensor> NetworkModel::snapshot_params() const {
    std::vector<Tensor> snap;
    for (nn::Params* p : const_cast<NetworkModel*>(this)->params()) snap.push_back(p->value);
    return snap;
}

void NetworkModel::restore_params(const std::vector<Tensor>& snapshot) {
    auto ps = params();
    if (snapshot.size() != ps.size()) throw DataError("restore_params: snapshot size mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!snapshot[i].same_shape(ps[i]->value))
            throw DataError("restore_params: shape mismatch at " + ps[i]->name);
        ps[i]->value = snapshot[i];
    }
}

double elastic_net_loss(NetworkModel& model, const BatchTensors& batch) {
    if (model.spec().kind != ModelKind::kElasticNet)
        throw DataError("elastic_net_loss: model is not an elastic net");
    double loss = multitask_smape(batch.y, model.forward(batch).prediction);
    for (nn::Params* w : model.penalized_weights()) {
        for (double v : w->value.values())
            loss += model.spec().l1 * std::abs(v) + model.spec().l2 * v * v;
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(ModelSpec spec, std::size_t vocab)
    : net_(std::make_unique<NetworkModel>(spec, vocab, 0)) {}

Tensor Encoder::encode(const BatchTensors& batch) const { return net_->representation(batch); }

std::size_t Encoder::param_count() const { return net_->encoder_param_count(); }

const ModelSpec& Encoder::spec() const { return net_->spec(); }

Encoder extract_encoder(const NetworkModel& model) {
    if (model.spec().kind != ModelKind::kMlp && model.spec().kind != ModelKind::kRnn)
        throw DataError("extract_encoder: " + to_string(model.spec().kind) +
                        " has no representation layer");
    Encoder enc(model.spec(), model.vocab());
    enc.network().restore_params(model.snapshot_params());
    return enc;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

std::vector<std::array<double, kNumTargets>> lag1_predict(const InteractionSequence& seq) {
    if (seq.length() < 2) throw DataError("lag1_predict: sequence must have at least 2 sessions");
    std::vector<std::array<double, kNumTargets>> preds;
    preds.reserve(seq.length() - 1);
    for (std::size_t t = 0; t + 1 < seq.length(); ++t) {
        std::array<double, kNumTargets> p{};
        for (std::size_t m = 0; m < kNumMetrics; ++m) p[m] = seq.sessions[t].metric(m);
        p[kNumTargets - 1] = 1.0; // lag-1 of a running count is not meaningful
        preds.push_back(p);
    }
    return preds;
}

MedianModel::MedianModel(double halflife) : halflife_(halflife) {
    if (halflife <= 0.0) throw ConfigError("MedianModel: halflife must be positive");
}

void MedianModel::fit(const Dataset& train) {
    if (train.sequences.empty()) throw DataError("MedianModel: empty training set");

    std::map<int, std::array<std::vector<double>, kNumTargets>> per_object;
    const double ratio = std::pow(0.5, 1.0 / halflife_); // weight per step back

    for (const auto& seq : train.sequences) {
        auto targets = build_targets(seq);
        std::array<double, kNumTargets> weighted{};
        double wsum = 0.0;
        // Most recent target carries weight 1, each step back multiplies by ratio.
        for (std::size_t i = 0; i < targets.size(); ++i) {
            double w = std::pow(ratio, static_cast<double>(targets.size() - 1 - i));
            wsum += w;
            for (std::size_t k = 0; k < kNumMetrics; ++k)
                weighted[k] += w * targets[i].metric(k);
            weighted[kNumTargets - 1] += w * targets[i].future_session_count;
        }
        auto& pools = per_object[seq.object_id];
        for (std::size_t k = 0; k < kNumTargets; ++k) pools[k].push_back(weighted[k] / wsum);
    }

    medians_.clear();
    for (auto& [obj, pools] : per_object) {
        std::array<double, kNumTargets> med{};
        for (std::size_t k = 0; k < kNumTargets; ++k) {
            auto& v = pools[k];
            std::sort(v.begin(), v.end());
            std::size_t n = v.size();
            med[k] = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
        medians_[obj] = med;
    }
}

std::array<double, kNumTargets> MedianModel::predict(int object_id) const {
    auto it = medians_.find(object_id);
    if (it == medians_.end())
        throw DataError("MedianModel: no fit for object id " + std::to_string(object_id));
    return it->second;
}

} // namespace salience
