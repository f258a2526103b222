#include "salience/layers.hpp"

#include "salience/common.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace salience::nn {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

MapRM map2(Tensor& t, std::size_t rows, std::size_t cols) {
    return MapRM(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMapRM cmap2(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMapRM(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Flatten [..., d] to [N, d]; returns leading shape for restoration.
std::pair<std::size_t, std::vector<std::size_t>> flatten_leading(const Tensor& x, std::size_t d,
                                                                 const char* who) {
    if (x.rank() < 2 || x.shape().back() != d)
        throw DataError(std::string(who) + ": input inner dimension mismatch");
    std::size_t n = x.size() / d;
    return {n, x.shape()};
}

double uniform_symmetric(std::mt19937_64& rng, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    return dist(rng);
}

} // namespace

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::kLinear: return x;
        case Activation::kRelu: return x > 0.0 ? x : 0.0;
        case Activation::kSoftplus:
            if (x > 30.0) return x;
            if (x < -30.0) return std::exp(x);
            return std::log1p(std::exp(x));
    }
    return x;
}

double activation_grad(Activation act, double pre, double /*post*/) {
    switch (act) {
        case Activation::kLinear: return 1.0;
        case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::kSoftplus: return sigmoid(pre);
    }
    return 1.0;
}

std::size_t Layer::param_count() const {
    std::size_t n = 0;
    for (const Params* p : const_cast<Layer*>(this)->params()) n += p->value.size();
    return n;
}

// ---------------------------------------------------------------------------
// DenseLayer
// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act)
    : weight_(name + ".weight", {in, out}),
      bias_(name + ".bias", {out}),
      name_(std::move(name)),
      in_(in),
      out_(out),
      act_(act) {}

void DenseLayer::init_params(std::mt19937_64& rng) {
    double limit = 1.0 / std::sqrt(static_cast<double>(in_));
    for (auto& w : weight_.value.values()) w = uniform_symmetric(rng, limit);
    bias_.value.zero();
}

Tensor DenseLayer::forward(const Tensor& x) {
    auto [n, shape] = flatten_leading(x, in_, "dense");
    cached_shape_ = shape;
    cached_input_ = x.reshaped({n, in_});

    cached_pre_ = matmul(cached_input_, weight_.value);
    auto pre = map2(cached_pre_, n, out_);
    for (std::size_t j = 0; j < out_; ++j)
        pre.col(static_cast<Eigen::Index>(j)).array() += bias_.value[j];

    cached_post_ = cached_pre_;
    if (act_ != Activation::kLinear)
        for (auto& v : cached_post_.values()) v = apply_activation(act_, v);

    auto out_shape = cached_shape_;
    out_shape.back() = out_;
    return cached_post_.reshaped(out_shape);
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
    std::size_t n = cached_input_.dim(0);
    if (grad_out.size() != n * out_) throw DataError("dense backward: gradient shape mismatch");
    Tensor g = grad_out.reshaped({n, out_});

    if (act_ != Activation::kLinear) {
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] *= activation_grad(act_, cached_pre_[i], cached_post_[i]);
    }

    Tensor dw = matmul_tn(cached_input_, g);
    axpy(1.0, dw, weight_.grad);
    auto gm = cmap2(g, n, out_);
    for (std::size_t j = 0; j < out_; ++j)
        bias_.grad[j] += gm.col(static_cast<Eigen::Index>(j)).sum();

    Tensor gin = matmul_nt(g, weight_.value);
    return gin.reshaped(cached_shape_);
}

// ---------------------------------------------------------------------------
// EmbeddingLayer
// ---------------------------------------------------------------------------

EmbeddingLayer::EmbeddingLayer(std::string name, std::size_t vocab, std::size_t dim)
    : table_(name + ".table", {vocab, dim}), name_(std::move(name)), vocab_(vocab), dim_(dim) {}

void EmbeddingLayer::init_params(std::mt19937_64& rng) {
    double limit = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (auto& w : table_.value.values()) w = uniform_symmetric(rng, limit);
}

Tensor EmbeddingLayer::forward(const std::vector<int>& ids, std::size_t steps) {
    cached_ids_ = ids;
    Tensor out({ids.size(), steps, dim_});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_)
            throw DataError("embedding: object id out of vocabulary");
        const double* row = table_.value.data() + static_cast<std::size_t>(id) * dim_;
        for (std::size_t t = 0; t < steps; ++t)
            std::copy(row, row + dim_, out.data() + (i * steps + t) * dim_);
    }
    return out;
}

void EmbeddingLayer::backward(const Tensor& grad_out) {
    if (grad_out.rank() != 3 || grad_out.dim(0) != cached_ids_.size() || grad_out.dim(2) != dim_)
        throw DataError("embedding backward: gradient shape mismatch");
    std::size_t steps = grad_out.dim(1);
    for (std::size_t i = 0; i < cached_ids_.size(); ++i) {
        double* grow = table_.grad.data() + static_cast<std::size_t>(cached_ids_[i]) * dim_;
        for (std::size_t t = 0; t < steps; ++t) {
            const double* g = grad_out.data() + (i * steps + t) * dim_;
            for (std::size_t d = 0; d < dim_; ++d) grow[d] += g[d];
        }
    }
}

// ---------------------------------------------------------------------------
// LstmLayer
// ---------------------------------------------------------------------------

LstmLayer::LstmLayer(std::string name, std::size_t in, std::size_t hidden)
    : w_input_(name + ".w_input", {in, 4 * hidden}),
      w_recurrent_(name + ".w_recurrent", {hidden, 4 * hidden}),
      bias_(name + ".bias", {4 * hidden}),
      name_(std::move(name)),
      in_(in),
      hidden_(hidden) {}

void LstmLayer::init_params(std::mt19937_64& rng) {
    double lim_in = 1.0 / std::sqrt(static_cast<double>(in_));
    double lim_rec = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (auto& w : w_input_.value.values()) w = uniform_symmetric(rng, lim_in);
    for (auto& w : w_recurrent_.value.values()) w = uniform_symmetric(rng, lim_rec);
    bias_.value.zero();
    for (std::size_t j = hidden_; j < 2 * hidden_; ++j) bias_.value[j] = 1.0; // forget gate
}

Tensor LstmLayer::forward(const Tensor& x) {
    if (x.rank() != 3) throw DataError("lstm: input must be [n, T, in]");
    Tensor h0({x.dim(0), hidden_});
    Tensor c0({x.dim(0), hidden_});
    return forward(x, h0, c0);
}

Tensor LstmLayer::forward(const Tensor& x, const Tensor& h0, const Tensor& c0) {
    if (x.rank() != 3 || x.dim(2) != in_) throw DataError("lstm: input must be [n, T, in]");
    const std::size_t n = x.dim(0), T = x.dim(1), h = hidden_;
    if (h0.shape() != std::vector<std::size_t>{n, h} || c0.shape() != std::vector<std::size_t>{n, h})
        throw DataError("lstm: initial state shape mismatch");

    cached_x_ = x;
    cached_h0_ = h0;
    cached_c0_ = c0;
    cached_gates_ = Tensor({n, T, 4 * h});
    cached_c_ = Tensor({n, T, h});
    cached_tanh_c_ = Tensor({n, T, h});
    cached_h_ = Tensor({n, T, h});

    // Input projection for all steps at once: [n*T, 4h].
    Tensor z_in = matmul(x.reshaped({n * T, in_}), w_input_.value);

    Tensor h_prev = h0, c_prev = c0;
    Tensor z({n, 4 * h});
    for (std::size_t t = 0; t < T; ++t) {
        Tensor z_rec = matmul(h_prev, w_recurrent_.value);
        for (std::size_t i = 0; i < n; ++i) {
            const double* zi = z_in.data() + (i * T + t) * 4 * h;
            const double* zr = z_rec.data() + i * 4 * h;
            double* zt = z.data() + i * 4 * h;
            for (std::size_t j = 0; j < 4 * h; ++j) zt[j] = zi[j] + zr[j] + bias_.value[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* zt = z.data() + i * 4 * h;
            double* gate = cached_gates_.data() + (i * T + t) * 4 * h;
            double* ct = cached_c_.data() + (i * T + t) * h;
            double* tct = cached_tanh_c_.data() + (i * T + t) * h;
            double* ht = cached_h_.data() + (i * T + t) * h;
            const double* cp = c_prev.data() + i * h;
            for (std::size_t j = 0; j < h; ++j) {
                double ig = sigmoid(zt[j]);
                double fg = sigmoid(zt[h + j]);
                double gg = std::tanh(zt[2 * h + j]);
                double og = sigmoid(zt[3 * h + j]);
                gate[j] = ig;
                gate[h + j] = fg;
                gate[2 * h + j] = gg;
                gate[3 * h + j] = og;
                double c_new = fg * cp[j] + ig * gg;
                ct[j] = c_new;
                double tc = std::tanh(c_new);
                tct[j] = tc;
                ht[j] = og * tc;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(cached_h_.data() + (i * T + t) * h, cached_h_.data() + (i * T + t) * h + h,
                      h_prev.data() + i * h);
            std::copy(cached_c_.data() + (i * T + t) * h, cached_c_.data() + (i * T + t) * h + h,
                      c_prev.data() + i * h);
        }
    }
    has_cache_ = true;
    return cached_h_;
}

Tensor LstmLayer::backward(const Tensor& grad_hseq) {
    if (!has_cache_) throw DataError("lstm backward called without a matching forward");
    const std::size_t n = cached_x_.dim(0), T = cached_x_.dim(1), h = hidden_;
    if (grad_hseq.shape() != std::vector<std::size_t>{n, T, h})
        throw DataError("lstm backward: gradient shape mismatch");

    Tensor dx({n, T, in_});
    Tensor dh_next({n, h}); // dL/dh_t flowing from step t+1
    Tensor dc_next({n, h});
    Tensor dz({n, 4 * h});
    Tensor h_prev_t({n, h});

    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* gate = cached_gates_.data() + (i * T + t) * 4 * h;
            const double* tct = cached_tanh_c_.data() + (i * T + t) * h;
            const double* g_h = grad_hseq.data() + (i * T + t) * h;
            const double* cp = (t == 0) ? cached_c0_.data() + i * h
                                        : cached_c_.data() + (i * T + t - 1) * h;
            double* dzi = dz.data() + i * 4 * h;
            double* dhn = dh_next.data() + i * h;
            double* dcn = dc_next.data() + i * h;
            for (std::size_t j = 0; j < h; ++j) {
                double ig = gate[j], fg = gate[h + j], gg = gate[2 * h + j], og = gate[3 * h + j];
                double dh = g_h[j] + dhn[j];
                double dc = dcn[j] + dh * og * (1.0 - tct[j] * tct[j]);
                double d_og = dh * tct[j];
                double d_ig = dc * gg;
                double d_gg = dc * ig;
                double d_fg = dc * cp[j];
                dzi[j] = d_ig * ig * (1.0 - ig);
                dzi[h + j] = d_fg * fg * (1.0 - fg);
                dzi[2 * h + j] = d_gg * (1.0 - gg * gg);
                dzi[3 * h + j] = d_og * og * (1.0 - og);
                dcn[j] = dc * fg;
            }
        }

        // Parameter gradients: dWx += x_t^T dz, dWh += h_{t-1}^T dz, db += sum dz.
        Tensor x_t({n, in_});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(cached_x_.data() + (i * T + t) * in_,
                      cached_x_.data() + (i * T + t) * in_ + in_, x_t.data() + i * in_);
        if (t == 0) {
            h_prev_t = cached_h0_;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                std::copy(cached_h_.data() + (i * T + t - 1) * h,
                          cached_h_.data() + (i * T + t - 1) * h + h, h_prev_t.data() + i * h);
        }
        axpy(1.0, matmul_tn(x_t, dz), w_input_.grad);
        axpy(1.0, matmul_tn(h_prev_t, dz), w_recurrent_.grad);
        auto dzm = cmap2(dz, n, 4 * h);
        for (std::size_t j = 0; j < 4 * h; ++j)
            bias_.grad[j] += dzm.col(static_cast<Eigen::Index>(j)).sum();

        Tensor dxt = matmul_nt(dz, w_input_.value);
        for (std::size_t i = 0; i < n; ++i)
            std::copy(dxt.data() + i * in_, dxt.data() + i * in_ + in_,
                      dx.data() + (i * T + t) * in_);
        dh_next = matmul_nt(dz, w_recurrent_.value);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// HeadLayer
// ---------------------------------------------------------------------------

HeadLayer::HeadLayer(std::string name, std::size_t in, std::vector<Activation> acts)
    : weight_(name + ".weight", {in, acts.size()}),
      bias_(name + ".bias", {acts.size()}),
      name_(std::move(name)),
      in_(in),
      acts_(std::move(acts)) {}

void HeadLayer::init_params(std::mt19937_64& rng) {
    double limit = 1.0 / std::sqrt(static_cast<double>(in_));
    for (auto& w : weight_.value.values()) w = uniform_symmetric(rng, limit);
    bias_.value.zero();
}

Tensor HeadLayer::forward(const Tensor& x) {
    auto [n, shape] = flatten_leading(x, in_, "heads");
    cached_shape_ = shape;
    cached_input_ = x.reshaped({n, in_});
    const std::size_t out = acts_.size();

    cached_pre_ = matmul(cached_input_, weight_.value);
    auto pre = map2(cached_pre_, n, out);
    for (std::size_t j = 0; j < out; ++j)
        pre.col(static_cast<Eigen::Index>(j)).array() += bias_.value[j];

    cached_post_ = cached_pre_;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j)
            cached_post_.at(i, j) = apply_activation(acts_[j], cached_pre_.at(i, j));

    auto out_shape = cached_shape_;
    out_shape.back() = out;
    return cached_post_.reshaped(out_shape);
}

Tensor HeadLayer::backward(const Tensor& grad_out) {
    std::size_t n = cached_input_.dim(0);
    const std::size_t out = acts_.size();
    if (grad_out.size() != n * out) throw DataError("heads backward: gradient shape mismatch");
    Tensor g = grad_out.reshaped({n, out});

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j)
            g.at(i, j) *= activation_grad(acts_[j], cached_pre_.at(i, j), cached_post_.at(i, j));

    axpy(1.0, matmul_tn(cached_input_, g), weight_.grad);
    auto gm = cmap2(g, n, out);
    for (std::size_t j = 0; j < out; ++j)
        bias_.grad[j] += gm.col(static_cast<Eigen::Index>(j)).sum();

    Tensor gin = matmul_nt(g, weight_.value);
    return gin.reshaped(cached_shape_);
}

// ---------------------------------------------------------------------------
// concat helpers
// ---------------------------------------------------------------------------

Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 2) throw DataError("concat_last: rank mismatch");
    for (std::size_t i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i)) throw DataError("concat_last: leading dimensions disagree");

    std::size_t da = a.shape().back(), db = b.shape().back();
    std::size_t rows = a.size() / da;
    auto shape = a.shape();
    shape.back() = da + db;
    Tensor out(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(a.data() + r * da, a.data() + (r + 1) * da, out.data() + r * (da + db));
        std::copy(b.data() + r * db, b.data() + (r + 1) * db, out.data() + r * (da + db) + da);
    }
    return out;
}

std::pair<Tensor, Tensor> split_last(const Tensor& g, std::size_t a_dim) {
    std::size_t d = g.shape().back();
    if (a_dim > d) throw DataError("split_last: split point exceeds dimension");
    std::size_t db = d - a_dim;
    std::size_t rows = g.size() / d;

    auto sa = g.shape();
    sa.back() = a_dim;
    auto sb = g.shape();
    sb.back() = db;
    Tensor a(sa), b(sb);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(g.data() + r * d, g.data() + r * d + a_dim, a.data() + r * a_dim);
        std::copy(g.data() + r * d + a_dim, g.data() + (r + 1) * d, b.data() + r * db);
    }
    return {std::move(a), std::move(b)};
}

} // namespace salience::nn
