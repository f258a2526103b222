#include "salience/adam.hpp"
#include "salience/common.hpp"
#include "salience/gradcheck.hpp"
#include "salience/layers.hpp"
#include "salience/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace salience;
using nn::Activation;
using nn::Params;
using nn::Tensor;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

// Scalar loss: dot(output, coefficients) so dL/dout is the coefficient tensor.
double weighted_sum(const Tensor& out, const Tensor& coeffs) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * coeffs[i];
    return s;
}

} // namespace

TEST_CASE("dense identity map") {
    nn::DenseLayer layer("d", 3, 3, Activation::kLinear);
    layer.weight_.value.zero();
    for (int i = 0; i < 3; ++i) layer.weight_.value.at(i, i) = 1.0;
    layer.bias_.value.zero();

    Tensor x({2, 3}, {1, 2, 3, -4, 0, 9});
    Tensor y = layer.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("relu activation clamps negatives") {
    nn::DenseLayer layer("d", 3, 3, Activation::kRelu);
    layer.weight_.value.zero();
    for (int i = 0; i < 3; ++i) layer.weight_.value.at(i, i) = 1.0;
    Tensor x({1, 3}, {-1.0, 0.0, 2.0});
    Tensor y = layer.forward(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
}

TEST_CASE("dense backward matches central finite differences on a 3x4 layer") {
    std::mt19937_64 rng(17);
    nn::DenseLayer layer("d", 3, 4, Activation::kRelu);
    layer.init_params(rng);

    Tensor x = random_tensor({5, 3}, rng);
    Tensor coeffs = random_tensor({5, 4}, rng);

    auto loss = [&]() { return weighted_sum(layer.forward(x), coeffs); };
    loss();
    layer.weight_.zero_grad();
    layer.bias_.zero_grad();
    layer.backward(coeffs);

    std::vector<Params*> params{&layer.weight_, &layer.bias_};
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("dense input gradient matches finite differences") {
    std::mt19937_64 rng(23);
    nn::DenseLayer layer("d", 3, 4, Activation::kLinear);
    layer.init_params(rng);

    Params x("input", {2, 3});
    x.value = random_tensor({2, 3}, rng);
    Tensor coeffs = random_tensor({2, 4}, rng);

    auto loss = [&]() { return weighted_sum(layer.forward(x.value), coeffs); };
    loss();
    x.zero_grad();
    x.grad = layer.backward(coeffs);

    std::vector<Params*> params{&x};
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("embedding looks up rows and broadcasts over steps") {
    std::mt19937_64 rng(29);
    nn::EmbeddingLayer emb("e", 2, 3);
    emb.table_.value = Tensor({2, 3}, {1, 2, 3, 10, 20, 30});

    Tensor out = emb.forward({1, 0}, 2);
    CHECK(out.at(0, 0, 0) == 10);
    CHECK(out.at(0, 1, 2) == 30);
    CHECK(out.at(1, 0, 0) == 1);

    CHECK_THROWS_AS(emb.forward({2}, 1), DataError);
    CHECK_THROWS_AS(emb.forward({-1}, 1), DataError);
}

TEST_CASE("embedding backward scatters into touched rows only") {
    std::mt19937_64 rng(31);
    nn::EmbeddingLayer emb("e", 4, 3);
    emb.init_params(rng);

    emb.forward({1, 1}, 2);
    Tensor g({2, 2, 3});
    g.fill(0.5);
    emb.table_.zero_grad();
    emb.backward(g);

    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(emb.table_.grad.at(0, d) == 0.0);
        CHECK(emb.table_.grad.at(1, d) == doctest::Approx(2.0)); // 2 rows x 2 steps x 0.5
        CHECK(emb.table_.grad.at(2, d) == 0.0);
        CHECK(emb.table_.grad.at(3, d) == 0.0);
    }
}

TEST_CASE("embedding gradient on touched rows passes finite differences") {
    std::mt19937_64 rng(37);
    nn::EmbeddingLayer emb("e", 3, 4);
    emb.init_params(rng);
    Tensor coeffs = random_tensor({2, 3, 4}, rng);
    std::vector<int> ids{0, 2};

    auto loss = [&]() { return weighted_sum(emb.forward(ids, 3), coeffs); };
    loss();
    emb.table_.zero_grad();
    emb.backward(coeffs);

    std::vector<Params*> params{&emb.table_};
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("lstm with all-zero parameters outputs zeros") {
    nn::LstmLayer lstm("l", 3, 4); // params default to zero
    std::mt19937_64 rng(41);
    Tensor x = random_tensor({2, 5, 3}, rng);
    Tensor h = lstm.forward(x);
    // Hand evaluation: gates sigmoid(0)=0.5, candidate tanh(0)=0, so c=0, h=0.5*tanh(0)=0.
    for (double v : h.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm output shape contract") {
    std::mt19937_64 rng(43);
    nn::LstmLayer lstm("l", 6, 8);
    lstm.init_params(rng);
    Tensor x = random_tensor({2, 3, 6}, rng);
    Tensor h = lstm.forward(x);
    CHECK(h.shape() == std::vector<std::size_t>{2, 3, 8});
}

TEST_CASE("lstm T=1 equals one hand-computed cell step from state0") {
    std::mt19937_64 rng(47);
    nn::LstmLayer lstm("l", 2, 3);
    lstm.init_params(rng);

    Tensor x = random_tensor({1, 1, 2}, rng);
    Tensor h0 = random_tensor({1, 3}, rng, 0.5);
    Tensor c0 = random_tensor({1, 3}, rng, 0.5);
    Tensor h = lstm.forward(x, h0, c0);

    // Independent single-cell evaluation with scalar loops.
    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t j = 0; j < 3; ++j) {
        double zi = lstm.bias_.value[j], zf = lstm.bias_.value[3 + j];
        double zg = lstm.bias_.value[6 + j], zo = lstm.bias_.value[9 + j];
        for (std::size_t i = 0; i < 2; ++i) {
            zi += x[i] * lstm.w_input_.value.at(i, j);
            zf += x[i] * lstm.w_input_.value.at(i, 3 + j);
            zg += x[i] * lstm.w_input_.value.at(i, 6 + j);
            zo += x[i] * lstm.w_input_.value.at(i, 9 + j);
        }
        for (std::size_t i = 0; i < 3; ++i) {
            zi += h0[i] * lstm.w_recurrent_.value.at(i, j);
            zf += h0[i] * lstm.w_recurrent_.value.at(i, 3 + j);
            zg += h0[i] * lstm.w_recurrent_.value.at(i, 6 + j);
            zo += h0[i] * lstm.w_recurrent_.value.at(i, 9 + j);
        }
        double c = sigmoid(zf) * c0[j] + sigmoid(zi) * std::tanh(zg);
        double expected = sigmoid(zo) * std::tanh(c);
        CHECK(h[j] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("lstm backward matches finite differences (batch=2, T=4, h=5)") {
    std::mt19937_64 rng(53);
    nn::LstmLayer lstm("l", 3, 5);
    lstm.init_params(rng);

    Tensor x = random_tensor({2, 4, 3}, rng);
    Tensor coeffs = random_tensor({2, 4, 5}, rng);

    auto loss = [&]() { return weighted_sum(lstm.forward(x), coeffs); };
    loss();
    for (Params* p : lstm.params()) p->zero_grad();
    lstm.backward(coeffs);

    auto params = lstm.params();
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("lstm input gradients match finite differences through time") {
    std::mt19937_64 rng(59);
    nn::LstmLayer lstm("l", 2, 4);
    lstm.init_params(rng);

    Params x("x", {2, 3, 2});
    x.value = random_tensor({2, 3, 2}, rng);
    Tensor coeffs = random_tensor({2, 3, 4}, rng);

    auto loss = [&]() { return weighted_sum(lstm.forward(x.value), coeffs); };
    loss();
    x.grad = lstm.backward(coeffs);

    std::vector<Params*> params{&x};
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("temporal credit flows back to the first step") {
    std::mt19937_64 rng(61);
    nn::LstmLayer lstm("l", 2, 4);
    lstm.init_params(rng);

    Tensor x = random_tensor({1, 4, 2}, rng);
    // Loss depends on the final step only.
    Tensor coeffs({1, 4, 4});
    for (std::size_t j = 0; j < 4; ++j) coeffs.at(0, 3, j) = 1.0;

    lstm.forward(x);
    Tensor dx = lstm.backward(coeffs);
    double first_step = 0.0;
    for (std::size_t d = 0; d < 2; ++d) first_step += std::abs(dx.at(0, 0, d));
    CHECK(first_step > 1e-8);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    std::mt19937_64 rng(67);
    nn::LstmLayer lstm("l", 3, 4);
    lstm.init_params(rng);
    Tensor x = random_tensor({2, 3, 3}, rng);
    lstm.forward(x);
    for (Params* p : lstm.params()) p->zero_grad();
    lstm.backward(Tensor({2, 3, 4}));
    for (Params* p : lstm.params())
        for (double g : p->grad.values()) CHECK(g == 0.0);
}

TEST_CASE("lstm backward without forward is rejected") {
    nn::LstmLayer lstm("l", 2, 3);
    CHECK_THROWS_AS(lstm.backward(Tensor({1, 1, 3})), DataError);
}

TEST_CASE("parameter counts match the closed forms") {
    CHECK(nn::DenseLayer::param_count(7, 5) == 7 * 5 + 5);
    CHECK(nn::EmbeddingLayer::param_count(6, 8) == 48);
    CHECK(nn::LstmLayer::param_count(12, 64) == 4 * 64 * (12 + 64 + 1));

    std::mt19937_64 rng(71);
    nn::LstmLayer lstm("l", 12, 64);
    std::size_t total = 0;
    for (Params* p : lstm.params()) total += p->value.size();
    CHECK(total == nn::LstmLayer::param_count(12, 64));
}

TEST_CASE("adam first step approximates a signed step") {
    Params w("w", {3});
    w.value = Tensor({3}, {1.0, -2.0, 0.5});
    w.grad = Tensor({3}, {0.3, -0.7, 10.0});

    nn::AdamState adam;
    adam.learning_rate = 0.01;
    std::vector<Params*> params{&w};
    adam.attach(params);
    nn::adam_step(params, adam);

    CHECK(w.value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(w.value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(w.value[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam is a fixpoint on zero gradients") {
    Params w("w", {2});
    w.value = Tensor({2}, {3.0, -4.0});
    nn::AdamState adam;
    std::vector<Params*> params{&w};
    adam.attach(params);
    for (int i = 0; i < 50; ++i) {
        w.grad.zero();
        nn::adam_step(params, adam);
    }
    CHECK(w.value[0] == 3.0);
    CHECK(w.value[1] == -4.0);
}

TEST_CASE("adam minimizes a quadratic bowl") {
    Params w("w", {1});
    w.value[0] = 1.0;
    nn::AdamState adam;
    adam.learning_rate = 0.05;
    std::vector<Params*> params{&w};
    adam.attach(params);
    for (int i = 0; i < 500; ++i) {
        w.grad[0] = 2.0 * w.value[0]; // d/dw of w^2
        nn::adam_step(params, adam);
    }
    CHECK(std::abs(w.value[0]) < 1e-2);
}

TEST_CASE("gradient_check on a linear layer with squared loss is near-exact") {
    std::mt19937_64 rng(73);
    nn::DenseLayer layer("d", 4, 3, Activation::kLinear);
    layer.init_params(rng);
    Tensor x = random_tensor({6, 4}, rng);
    Tensor target = random_tensor({6, 3}, rng);

    auto forward_loss = [&]() {
        Tensor y = layer.forward(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - target[i]) * (y[i] - target[i]);
        return s;
    };
    forward_loss();
    Tensor y = layer.forward(x);
    Tensor g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = 2.0 * (y[i] - target[i]);
    for (Params* p : layer.params()) p->zero_grad();
    layer.backward(g);

    auto params = layer.params();
    auto report = nn::gradient_check(forward_loss, params, 1e-5);
    CHECK(report.max_rel_error < 1e-7); // loss is quadratic: central differences are exact
}

TEST_CASE("gradient_check detects a single flipped sign") {
    std::mt19937_64 rng(79);
    nn::DenseLayer layer("d", 3, 3, Activation::kRelu);
    layer.init_params(rng);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor coeffs = random_tensor({4, 3}, rng);

    auto loss = [&]() { return weighted_sum(layer.forward(x), coeffs); };
    loss();
    for (Params* p : layer.params()) p->zero_grad();
    layer.backward(coeffs);
    layer.weight_.grad[0] = -layer.weight_.grad[0]; // corrupt one entry

    auto params = layer.params();
    auto report = nn::gradient_check(loss, params, 1e-5);
    CHECK(report.max_rel_error > 1e-1);
}

TEST_CASE("backward of a one-hot upstream equals a numerical Jacobian column") {
    std::mt19937_64 rng(83);
    nn::DenseLayer layer("d", 3, 4, Activation::kSoftplus);
    layer.init_params(rng);
    Params x("x", {1, 3});
    x.value = random_tensor({1, 3}, rng);

    for (std::size_t out_idx = 0; out_idx < 4; ++out_idx) {
        Tensor one_hot({1, 4});
        one_hot[out_idx] = 1.0;
        layer.forward(x.value);
        Tensor gin = layer.backward(one_hot);

        for (std::size_t in_idx = 0; in_idx < 3; ++in_idx) {
            double h = 1e-5;
            double saved = x.value[in_idx];
            x.value[in_idx] = saved + h;
            double plus = layer.forward(x.value)[out_idx];
            x.value[in_idx] = saved - h;
            double minus = layer.forward(x.value)[out_idx];
            x.value[in_idx] = saved;
            double numeric = (plus - minus) / (2.0 * h);
            double denom = std::max({std::abs(numeric), std::abs(gin[in_idx]), 1e-7});
            CHECK(std::abs(numeric - gin[in_idx]) / denom < 1e-4);
        }
    }
}

TEST_CASE("concat and split are inverse") {
    std::mt19937_64 rng(89);
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tensor b = random_tensor({2, 3, 2}, rng);
    Tensor c = nn::concat_last(a, b);
    CHECK(c.shape() == std::vector<std::size_t>{2, 3, 6});
    auto [ga, gb] = nn::split_last(c, 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(ga[i] == a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(gb[i] == b[i]);
}
