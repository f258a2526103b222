#include "salience/analysis.hpp"
#include "salience/common.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace salience;

namespace {

std::vector<double> linspace(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

} // namespace

TEST_CASE("mic of a perfect identity relation is ~1") {
    auto x = linspace(1000);
    auto result = mic(x, x);
    CHECK(!result.degenerate);
    CHECK(result.value >= 0.99);
}

TEST_CASE("mic captures a noiseless non-monotone dependence") {
    auto x = linspace(1000);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::sin(4.0 * M_PI * x[i]);
    auto result = mic(x, y);
    CHECK(result.value >= 0.8);
}

TEST_CASE("mic of independent uniforms stays low") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> x(1000), y(1000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = dist(rng);
        y[i] = dist(rng);
    }
    auto result = mic(x, y);
    CHECK(result.value < 0.2);
}

TEST_CASE("mic null distribution: 95th percentile of permuted identities stays below 0.2") {
    // Permutation oracle: shuffle one side repeatedly and track the upper tail.
    std::mt19937_64 rng(7);
    auto x = linspace(1000);
    std::vector<double> y = x;
    std::vector<double> null_values;
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(y.begin(), y.end(), rng);
        null_values.push_back(mic(x, y).value);
    }
    std::sort(null_values.begin(), null_values.end());
    CHECK(null_values[18] < 0.2); // ~95th percentile of the null
}

TEST_CASE("mic is invariant under strictly monotone reparameterizations") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 0.1);
    auto x = linspace(500);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + noise(rng);

    double base = mic(x, y).value;

    std::vector<double> x_exp(x.size()), y_log(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x_exp[i] = std::exp(3.0 * x[i]);
        y_log[i] = std::log(y[i] + 2.0);
    }
    CHECK(std::abs(mic(x_exp, y).value - base) <= 0.05);
    CHECK(std::abs(mic(x, y_log).value - base) <= 0.05);
    CHECK(std::abs(mic(x_exp, y_log).value - base) <= 0.05);
}

TEST_CASE("mic flags constant inputs as degenerate") {
    std::vector<double> constant(100, 3.0);
    auto x = linspace(100);
    auto result = mic(constant, x);
    CHECK(result.degenerate);
    CHECK(result.value == 0.0);
}

TEST_CASE("mic rejects short or mismatched input") {
    std::vector<double> tiny(10, 1.0);
    CHECK_THROWS_AS(mic(tiny, tiny), DataError);
    auto x = linspace(30);
    auto y = linspace(40);
    CHECK_THROWS_AS(mic(x, y), DataError);
}

TEST_CASE("mic stays within [0, 1] on assorted relations") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.5);
    auto x = linspace(400);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = std::cos(3.0 * x[i]) + noise(rng) * x[i];
    auto result = mic(x, y);
    CHECK(result.value >= 0.0);
    CHECK(result.value <= 1.0);
}
