#include "salience/analysis.hpp"
#include "salience/common.hpp"
#include "salience/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace salience {

using nn::Tensor;

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

struct Edge {
    std::size_t from, to;
    double weight;
};

// Exact k-nearest-neighbours under cosine distance, row blocks to bound memory.
void knn_cosine(const Tensor& points, int k, std::vector<std::vector<std::pair<double, std::size_t>>>& out) {
    const std::size_t n = points.dim(0);
    const std::size_t d = points.dim(1);
    ConstMapRM X(points.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));

    MatrixRM normalized = X;
    for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
        double norm = normalized.row(i).norm();
        if (norm > 0.0) normalized.row(i) /= norm;
    }

    out.assign(n, {});
    const std::size_t block = 512;
    for (std::size_t start = 0; start < n; start += block) {
        std::size_t rows = std::min(block, n - start);
        MatrixRM sims = normalized.middleRows(static_cast<Eigen::Index>(start),
                                              static_cast<Eigen::Index>(rows)) *
                        normalized.transpose();
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t i = start + r;
            std::vector<std::pair<double, std::size_t>> dists;
            dists.reserve(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double dist = 1.0 - sims(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
                dists.emplace_back(std::max(dist, 0.0), j);
            }
            std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
            dists.resize(static_cast<std::size_t>(k));
            out[i] = std::move(dists);
        }
    }
}

// Per-point bandwidth so that the effective neighbourhood mass is log2(k).
void smooth_knn_weights(std::vector<std::vector<std::pair<double, std::size_t>>>& knn) {
    const double target = std::log2(static_cast<double>(knn.empty() ? 1 : knn[0].size()));
    for (auto& neighbors : knn) {
        double rho = 0.0;
        for (const auto& [dist, j] : neighbors) {
            if (dist > 0.0) {
                rho = dist;
                break;
            }
        }
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
        for (int it = 0; it < 64; ++it) {
            double sum = 0.0;
            for (const auto& [dist, j] : neighbors) {
                double adj = std::max(0.0, dist - rho);
                sum += std::exp(-adj / mid);
            }
            if (std::abs(sum - target) < 1e-5) break;
            if (sum > target) {
                hi = mid;
                mid = 0.5 * (lo + hi);
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
            }
        }
        for (auto& [dist, j] : neighbors)
            dist = std::exp(-std::max(0.0, dist - rho) / mid); // distance becomes weight
    }
}

// Fuzzy set union w_ij + w_ji - w_ij * w_ji over the directed k-NN graph.
std::vector<Edge> symmetrize(const std::vector<std::vector<std::pair<double, std::size_t>>>& knn) {
    std::map<std::pair<std::size_t, std::size_t>, double> directed;
    for (std::size_t i = 0; i < knn.size(); ++i)
        for (const auto& [w, j] : knn[i]) directed[{i, j}] = w;

    std::map<std::pair<std::size_t, std::size_t>, double> merged;
    for (const auto& [key, w] : directed) {
        auto [i, j] = key;
        if (i >= j) continue;
        double w_ji = 0.0;
        auto it = directed.find({j, i});
        if (it != directed.end()) w_ji = it->second;
        merged[{i, j}] = w + w_ji - w * w_ji;
    }
    for (const auto& [key, w] : directed) {
        auto [i, j] = key;
        if (i < j || merged.count({j, i})) continue;
        merged[{j, i}] = w;
    }

    std::vector<Edge> edges;
    edges.reserve(merged.size());
    for (const auto& [key, w] : merged)
        if (w > 0.0) edges.push_back({key.first, key.second, w});
    return edges;
}

// Least-squares fit of 1 / (1 + a d^{2b}) to the min_dist/spread kernel.
std::pair<double, double> fit_kernel(double min_dist, double spread) {
    const int samples = 300;
    std::vector<double> xs(samples), ys(samples);
    for (int i = 0; i < samples; ++i) {
        double d = 3.0 * spread * (i + 1.0) / samples;
        xs[static_cast<std::size_t>(i)] = d;
        ys[static_cast<std::size_t>(i)] =
            d <= min_dist ? 1.0 : std::exp(-(d - min_dist) / spread);
    }

    double a = 1.0, b = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        // Gauss-Newton on residuals r = f(d) - y with parameters (a, b).
        double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
        for (int i = 0; i < samples; ++i) {
            double d = xs[static_cast<std::size_t>(i)];
            double p = std::pow(d, 2.0 * b);
            double f = 1.0 / (1.0 + a * p);
            double r = f - ys[static_cast<std::size_t>(i)];
            double dfda = -p * f * f;
            double dfdb = -2.0 * a * p * std::log(d) * f * f;
            jaa += dfda * dfda;
            jab += dfda * dfdb;
            jbb += dfdb * dfdb;
            ga += dfda * r;
            gb += dfdb * r;
        }
        double damp = 1e-9;
        double det = (jaa + damp) * (jbb + damp) - jab * jab;
        if (std::abs(det) < 1e-15) break;
        double da = (-ga * (jbb + damp) + gb * jab) / det;
        double db = (-gb * (jaa + damp) + ga * jab) / det;
        a = std::max(1e-3, a + da);
        b = std::min(std::max(1e-3, b + db), 5.0);
        if (std::abs(da) + std::abs(db) < 1e-10) break;
    }
    return {a, b};
}

Tensor pca_init(const Tensor& points, double scale) {
    const std::size_t n = points.dim(0);
    Tensor coords({n, 2});
    int comps = std::min<int>(2, static_cast<int>(points.dim(1)));
    auto pca = pca_explained_variance(points, comps);
    double max_abs = 0.0;
    std::vector<std::vector<double>> scores;
    for (int c = 0; c < comps; ++c) {
        scores.push_back(pca_scores(pca, points, c));
        for (double s : scores.back()) max_abs = std::max(max_abs, std::abs(s));
    }
    double norm = max_abs > 0.0 ? scale / max_abs : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        coords.at(i, 0) = scores[0][i] * norm;
        coords.at(i, 1) = comps > 1 ? scores[1][i] * norm : 0.0;
    }
    return coords;
}

void optimize_layout(Tensor& coords, const std::vector<Edge>& edges, const EmbedConfig& cfg,
                     double a, double b, std::mt19937_64& rng) {
    const std::size_t n = coords.dim(0);
    if (edges.empty() || n < 2) return;

    double w_max = 0.0;
    for (const Edge& e : edges) w_max = std::max(w_max, e.weight);
    std::vector<double> epochs_per_sample(edges.size());
    std::vector<double> next_due(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        epochs_per_sample[e] = w_max / edges[e].weight;
        next_due[e] = epochs_per_sample[e];
    }

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const double clamp_limit = 4.0;
    auto clamp = [&](double v) { return std::clamp(v, -clamp_limit, clamp_limit); };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double lr = cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_due[e] > static_cast<double>(epoch)) continue;
            next_due[e] += epochs_per_sample[e];

            std::size_t i = edges[e].from, j = edges[e].to;
            double* yi = coords.data() + i * 2;
            double* yj = coords.data() + j * 2;
            double dx = yi[0] - yj[0], dy = yi[1] - yj[1];
            double dist2 = dx * dx + dy * dy;
            if (dist2 > 0.0) {
                double pd = std::pow(dist2, b - 1.0);
                double coef = (-2.0 * a * b * pd) / (1.0 + a * pd * dist2);
                double gx = clamp(coef * dx), gy = clamp(coef * dy);
                yi[0] += lr * gx;
                yi[1] += lr * gy;
                yj[0] -= lr * gx;
                yj[1] -= lr * gy;
            }

            for (int s = 0; s < cfg.negative_samples; ++s) {
                std::size_t r = pick(rng);
                if (r == i) continue;
                double* yr = coords.data() + r * 2;
                double rx = yi[0] - yr[0], ry = yi[1] - yr[1];
                double rd2 = rx * rx + ry * ry;
                double coef;
                if (rd2 > 0.0) {
                    coef = (2.0 * b) / ((0.001 + rd2) * (1.0 + a * std::pow(rd2, b)));
                } else {
                    coef = clamp_limit;
                }
                yi[0] += lr * clamp(coef * rx);
                yi[1] += lr * clamp(coef * ry);
            }
        }
    }
}

EmbeddingResult embed_with_init(const Tensor& points, const EmbedConfig& cfg, Tensor coords) {
    const std::size_t n = points.dim(0);
    std::vector<std::vector<std::pair<double, std::size_t>>> knn;
    knn_cosine(points, cfg.n_neighbors, knn);
    smooth_knn_weights(knn);
    auto edges = symmetrize(knn);
    auto [a, b] = fit_kernel(cfg.min_dist, cfg.spread);

    auto rng = make_engine(cfg.seed, 0x756d6170ULL);
    std::uniform_real_distribution<double> jitter(-1e-4, 1e-4);
    for (std::size_t i = 0; i < n * 2; ++i) coords[i] += jitter(rng);

    optimize_layout(coords, edges, cfg, a, b, rng);

    EmbeddingResult out;
    out.points = std::move(coords);
    return out;
}

} // namespace

EmbeddingResult neighbor_embed(const Tensor& points, const EmbedConfig& cfg) {
    if (points.rank() != 2) throw DataError("neighbor_embed: points must be [n, d]");
    const std::size_t n = points.dim(0);
    if (cfg.n_neighbors < 1) throw DataError("neighbor_embed: n_neighbors must be >= 1");
    if (static_cast<std::size_t>(cfg.n_neighbors) >= n)
        throw DataError("neighbor_embed: n_neighbors must be smaller than the number of points");
    if (cfg.epochs < 1) throw DataError("neighbor_embed: epochs must be >= 1");

    return embed_with_init(points, cfg, pca_init(points, 10.0));
}

std::vector<EmbeddingResult> aligned_embed(const std::vector<SteppedPoints>& steps,
                                           const EmbedConfig& cfg) {
    if (steps.empty()) throw DataError("aligned_embed: no steps");
    for (const auto& s : steps)
        if (s.points.rank() != 2 || s.points.dim(0) != s.agents.size())
            throw DataError("aligned_embed: each step needs one agent id per row");

    std::vector<EmbeddingResult> results;
    std::map<std::string, std::pair<double, double>> last_coords;

    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& step = steps[t];
        const std::size_t n = step.points.dim(0);
        EmbedConfig step_cfg = cfg;
        step_cfg.seed = derive_seed(cfg.seed, t);
        step_cfg.n_neighbors = std::min<int>(cfg.n_neighbors, static_cast<int>(n) - 1);
        if (step_cfg.n_neighbors < 1)
            throw DataError("aligned_embed: step has too few points");

        Tensor init = pca_init(step.points, 10.0);
        std::size_t shared = 0;
        if (t > 0) {
            for (std::size_t i = 0; i < n; ++i) {
                auto it = last_coords.find(step.agents[i]);
                if (it != last_coords.end()) {
                    init.at(i, 0) = it->second.first;
                    init.at(i, 1) = it->second.second;
                    ++shared;
                }
            }
            if (shared == 0)
                throw DataError("aligned_embed: consecutive steps share no agents");
            // The warm start is already organized; a gentler rate refines it
            // instead of re-scattering, which keeps trajectories comparable.
            step_cfg.learning_rate = cfg.learning_rate * 0.2;
        }

        EmbeddingResult res = embed_with_init(step.points, step_cfg, std::move(init));
        res.source_step = static_cast<int>(t) + 1;
        res.agents = step.agents;

        last_coords.clear();
        for (std::size_t i = 0; i < n; ++i)
            last_coords[step.agents[i]] = {res.points.at(i, 0), res.points.at(i, 1)};
        results.push_back(std::move(res));
    }
    return results;
}

} // namespace salience
