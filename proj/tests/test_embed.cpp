#include "salience/analysis.hpp"
#include "salience/common.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace salience;
using nn::Tensor;

namespace {

// Two clusters separated in direction, as cosine distance ignores magnitude.
Tensor two_cone_clusters(std::size_t per_cluster, std::uint64_t seed, std::vector<int>* labels) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.08);
    Tensor points({2 * per_cluster, 8});
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < per_cluster; ++i) {
            std::size_t row = c * per_cluster + i;
            for (std::size_t d = 0; d < 8; ++d) {
                double base = (c == 0) ? (d < 4 ? 1.0 : 0.0) : (d < 4 ? 0.0 : 1.0);
                points.at(row, d) = base + noise(rng);
            }
            if (labels) labels->push_back(static_cast<int>(c));
        }
    }
    return points;
}

EmbedConfig fast_config(std::uint64_t seed) {
    EmbedConfig cfg;
    cfg.n_neighbors = 15;
    cfg.min_dist = 0.1;
    cfg.epochs = 300;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("embedding separates two well-separated clusters") {
    std::vector<int> labels;
    Tensor points = two_cone_clusters(1000, 1, &labels);
    auto result = neighbor_embed(points, fast_config(3));
    REQUIRE(result.points.shape() == std::vector<std::size_t>{2000, 2});
    CHECK(silhouette(result.points, labels) > 0.5);
}

TEST_CASE("duplicate points land on near-identical coordinates") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor points({402, 6});
    for (auto& v : points.values()) v = noise(rng);
    // Rows 0 and 1 are exact duplicates.
    for (std::size_t d = 0; d < 6; ++d) points.at(1, d) = points.at(0, d);

    auto result = neighbor_embed(points, fast_config(7));
    double dx = result.points.at(0, 0) - result.points.at(1, 0);
    double dy = result.points.at(0, 1) - result.points.at(1, 1);
    double dup_dist = std::sqrt(dx * dx + dy * dy);

    double span = 0.0;
    for (std::size_t i = 0; i < result.points.dim(0); ++i) {
        span = std::max(span, std::abs(result.points.at(i, 0)));
        span = std::max(span, std::abs(result.points.at(i, 1)));
    }
    CHECK(dup_dist < span * 2e-2);
}

TEST_CASE("embedding is deterministic per seed") {
    std::vector<int> labels;
    Tensor points = two_cone_clusters(150, 9, &labels);
    auto a = neighbor_embed(points, fast_config(11));
    auto b = neighbor_embed(points, fast_config(11));
    for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i] == b.points[i]);

    auto c = neighbor_embed(points, fast_config(12));
    bool any_different = false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i] != c.points[i]) any_different = true;
    CHECK(any_different);
}

TEST_CASE("embedding rejects n_neighbors >= n") {
    Tensor points({10, 3});
    EmbedConfig cfg;
    cfg.n_neighbors = 10;
    CHECK_THROWS_AS(neighbor_embed(points, cfg), DataError);
}

TEST_CASE("neighborhood membership is approximately preserved on clustered data") {
    std::vector<int> labels;
    Tensor points = two_cone_clusters(300, 13, &labels);
    auto result = neighbor_embed(points, fast_config(17));
    const std::size_t n = points.dim(0);
    const int k = 15;

    // k-NN overlap between input space (cosine) and embedding (euclidean).
    auto knn_of = [&](auto&& dist_fn) {
        std::vector<std::set<std::size_t>> knn(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::pair<double, std::size_t>> d;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) d.push_back({dist_fn(i, j), j});
            std::partial_sort(d.begin(), d.begin() + k, d.end());
            for (int t = 0; t < k; ++t) knn[i].insert(d[static_cast<std::size_t>(t)].second);
        }
        return knn;
    };
    auto cosine = [&](std::size_t i, std::size_t j) {
        double dot = 0, ni = 0, nj = 0;
        for (std::size_t d = 0; d < points.dim(1); ++d) {
            dot += points.at(i, d) * points.at(j, d);
            ni += points.at(i, d) * points.at(i, d);
            nj += points.at(j, d) * points.at(j, d);
        }
        return 1.0 - dot / std::sqrt(ni * nj);
    };
    auto euclid = [&](std::size_t i, std::size_t j) {
        double dx = result.points.at(i, 0) - result.points.at(j, 0);
        double dy = result.points.at(i, 1) - result.points.at(j, 1);
        return dx * dx + dy * dy;
    };
    auto in_knn = knn_of(cosine);
    auto out_knn = knn_of(euclid);
    double overlap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t shared = 0;
        for (std::size_t j : in_knn[i])
            if (out_knn[i].count(j)) ++shared;
        overlap += static_cast<double>(shared) / k;
    }
    overlap /= static_cast<double>(n);
    CHECK(overlap > 0.3);
}

TEST_CASE("aligned embedding of static representations barely moves agents") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t n = 250;
    SteppedPoints step;
    step.points = Tensor({n, 6});
    for (auto& v : step.points.values()) v = noise(rng);
    for (std::size_t i = 0; i < n; ++i) step.agents.push_back("a" + std::to_string(i));

    std::vector<SteppedPoints> steps{step, step, step};
    EmbedConfig cfg = fast_config(21);
    auto results = aligned_embed(steps, cfg);
    REQUIRE(results.size() == 3);
    CHECK(results[0].source_step == 1);
    CHECK(results[2].source_step == 3);

    double span = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        span = std::max(span, std::abs(results[0].points.at(i, 0)));
        span = std::max(span, std::abs(results[0].points.at(i, 1)));
    }
    // Warm start from identical data: displacement stays small vs layout scale.
    double mean_disp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = results[1].points.at(i, 0) - results[0].points.at(i, 0);
        double dy = results[1].points.at(i, 1) - results[0].points.at(i, 1);
        mean_disp += std::sqrt(dx * dx + dy * dy);
    }
    mean_disp /= static_cast<double>(n);
    CHECK(mean_disp < 0.15 * span);
}

TEST_CASE("agents that jump between clusters cross between embedded regions") {
    std::vector<int> labels;
    const std::size_t per = 200;
    Tensor base = two_cone_clusters(per, 23, &labels);
    std::vector<std::string> agents;
    for (std::size_t i = 0; i < 2 * per; ++i) agents.push_back("a" + std::to_string(i));

    // Step 2: the first 20 agents of cluster 0 move to cluster 1's cone.
    Tensor moved = base;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t d = 0; d < 8; ++d) moved.at(i, d) = base.at(per + i, d);

    std::vector<SteppedPoints> steps{{base, agents}, {moved, agents}};
    auto results = aligned_embed(steps, fast_config(29));

    // Centroids of the stable clusters in the second embedding.
    auto centroid = [&](int label, const EmbeddingResult& r) {
        double cx = 0, cy = 0;
        int count = 0;
        for (std::size_t i = 20; i < 2 * per; ++i) { // skip the movers
            if (labels[i] != label) continue;
            cx += r.points.at(i, 0);
            cy += r.points.at(i, 1);
            ++count;
        }
        return std::pair<double, double>{cx / count, cy / count};
    };
    auto [c0x, c0y] = centroid(0, results[1]);
    auto [c1x, c1y] = centroid(1, results[1]);

    int crossed = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        double d0 = std::hypot(results[1].points.at(i, 0) - c0x, results[1].points.at(i, 1) - c0y);
        double d1 = std::hypot(results[1].points.at(i, 0) - c1x, results[1].points.at(i, 1) - c1y);
        if (d1 < d0) ++crossed;
    }
    CHECK(crossed >= 15); // movers end up in the other embedded region
}

TEST_CASE("aligned embedding rejects disjoint agent sets") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 1.0);
    SteppedPoints a, b;
    a.points = Tensor({30, 4});
    b.points = Tensor({30, 4});
    for (auto& v : a.points.values()) v = noise(rng);
    for (auto& v : b.points.values()) v = noise(rng);
    for (int i = 0; i < 30; ++i) {
        a.agents.push_back("a" + std::to_string(i));
        b.agents.push_back("b" + std::to_string(i));
    }
    EmbedConfig cfg = fast_config(33);
    cfg.n_neighbors = 10;
    CHECK_THROWS_AS(aligned_embed({a, b}, cfg), DataError);
}
