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

ConstMapRM points_map(const Tensor& points, const char* who) {
    if (points.rank() != 2) throw DataError(std::string(who) + ": points must be [n, d]");
    return ConstMapRM(points.data(), static_cast<Eigen::Index>(points.dim(0)),
                      static_cast<Eigen::Index>(points.dim(1)));
}

std::vector<double> ranks_with_ties(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    return rank;
}

} // namespace

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

PcaResult pca_explained_variance(const Tensor& points, int n_components) {
    auto X = points_map(points, "pca");
    const auto n = X.rows();
    const auto d = X.cols();
    if (n_components < 1) throw DataError("pca: need at least one component");
    if (n_components > d) throw DataError("pca: more components than dimensions");
    if (n < 2) throw DataError("pca: need at least two points");

    Eigen::RowVectorXd mean = X.colwise().mean();
    MatrixRM centered = X.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericalError("pca: eigen-decomposition failed");

    // Eigenvalues come out ascending; we want the top ones.
    Eigen::VectorXd evals = solver.eigenvalues();
    double total = std::max(evals.sum(), 0.0);

    PcaResult out;
    out.mean.assign(mean.data(), mean.data() + d);
    out.components = Tensor({static_cast<std::size_t>(d), static_cast<std::size_t>(n_components)});
    out.explained.resize(static_cast<std::size_t>(n_components));
    for (int c = 0; c < n_components; ++c) {
        auto src = static_cast<Eigen::Index>(d - 1 - c);
        double ev = std::max(evals[src], 0.0);
        out.explained[static_cast<std::size_t>(c)] = total > 0.0 ? ev / total : 0.0;
        for (Eigen::Index r = 0; r < d; ++r)
            out.components.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                solver.eigenvectors()(r, src);
    }
    return out;
}

std::vector<double> pca_scores(const PcaResult& pca, const Tensor& points, int component) {
    auto X = points_map(points, "pca_scores");
    if (component < 0 || static_cast<std::size_t>(component) >= pca.components.dim(1))
        throw DataError("pca_scores: component out of range");
    if (static_cast<std::size_t>(X.cols()) != pca.components.dim(0))
        throw DataError("pca_scores: dimension mismatch");

    std::vector<double> scores(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index jd = 0; jd < X.cols(); ++jd)
            s += (X(i, jd) - pca.mean[static_cast<std::size_t>(jd)]) *
                 pca.components.at(static_cast<std::size_t>(jd), static_cast<std::size_t>(component));
        scores[static_cast<std::size_t>(i)] = s;
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Rank statistics / discounted sums
// ---------------------------------------------------------------------------

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("spearman: length mismatch");
    if (x.size() < 2) throw DataError("spearman: need at least two points");
    auto rx = ranks_with_ties(x);
    auto ry = ranks_with_ties(y);
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double discounted_future_sum(std::span<const double> preds, double gamma, std::size_t from_step) {
    if (gamma < 0.0 || gamma >= 1.0) throw DataError("discounted_future_sum: gamma must be in [0, 1)");
    if (from_step < 1 || from_step > preds.size())
        throw DataError("discounted_future_sum: from_step out of range");
    double sum = 0.0, w = 1.0;
    for (std::size_t i = from_step - 1; i < preds.size(); ++i) {
        sum += w * preds[i];
        w *= gamma;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Mini-batch k-means
// ---------------------------------------------------------------------------

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

int nearest_centroid(const double* x, const Tensor& centroids, std::size_t d) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.dim(0); ++c) {
        double dist = squared_distance(x, centroids.data() + c * d, d);
        if (dist < best_d) {
            best_d = dist;
            best = static_cast<int>(c);
        }
    }
    return best;
}

} // namespace

KMeansResult minibatch_kmeans(const Tensor& points, int k, std::size_t batch_size, int n_init,
                              int max_epochs, std::uint64_t seed) {
    auto X = points_map(points, "kmeans");
    const std::size_t n = static_cast<std::size_t>(X.rows());
    const std::size_t d = static_cast<std::size_t>(X.cols());
    if (k < 1) throw DataError("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(k) > n) throw DataError("kmeans: k exceeds number of points");
    if (n_init < 1 || max_epochs < 1) throw DataError("kmeans: n_init and max_epochs must be >= 1");
    batch_size = std::min(std::max<std::size_t>(batch_size, 1), n);

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < n_init; ++restart) {
        auto rng = make_engine(seed, static_cast<std::uint64_t>(restart));

        // Random distinct points as initial centroids.
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        std::shuffle(pool.begin(), pool.end(), rng);
        Tensor centroids({static_cast<std::size_t>(k), d});
        for (int c = 0; c < k; ++c)
            std::copy(points.data() + pool[static_cast<std::size_t>(c)] * d,
                      points.data() + pool[static_cast<std::size_t>(c)] * d + d,
                      centroids.data() + static_cast<std::size_t>(c) * d);

        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);

        for (int epoch = 0; epoch < max_epochs; ++epoch) {
            double movement = 0.0;
            for (std::size_t b = 0; b < batch_size; ++b) {
                std::size_t idx = pick(rng);
                const double* x = points.data() + idx * d;
                int c = nearest_centroid(x, centroids, d);
                double lr = 1.0 / static_cast<double>(++counts[static_cast<std::size_t>(c)]);
                double* mu = centroids.data() + static_cast<std::size_t>(c) * d;
                for (std::size_t j = 0; j < d; ++j) {
                    double step = lr * (x[j] - mu[j]);
                    mu[j] += step;
                    movement += step * step;
                }
            }
            if (movement < 1e-12) break;
        }

        std::vector<int> assignments(n);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = points.data() + i * d;
            int c = nearest_centroid(x, centroids, d);
            assignments[i] = c;
            inertia += squared_distance(x, centroids.data() + static_cast<std::size_t>(c) * d, d);
        }
        if (inertia < best.inertia) {
            best.centroids = std::move(centroids);
            best.assignments = std::move(assignments);
            best.inertia = inertia;
        }
    }
    return best;
}

ElbowResult elbow(const std::vector<std::pair<int, double>>& inertia_curve) {
    if (inertia_curve.size() < 4) throw DataError("elbow: need at least 4 curve points");
    auto curve = inertia_curve;
    std::sort(curve.begin(), curve.end());

    double x0 = curve.front().first, x1 = curve.back().first;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (auto& [k, v] : curve) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
    }
    ElbowResult out;
    out.k = curve.front().first;
    if (x1 == x0 || ymax == ymin) return out; // flat or degenerate: no knee

    double best = 0.0;
    for (const auto& [k, v] : curve) {
        double xn = (static_cast<double>(k) - x0) / (x1 - x0);
        double yn = (v - ymin) / (ymax - ymin);
        double chord = curve.front().second;
        chord = (chord - ymin) / (ymax - ymin);
        double end = (curve.back().second - ymin) / (ymax - ymin);
        double on_chord = chord + (end - chord) * xn;
        double dist = on_chord - yn; // positive when the curve sags below the chord
        if (dist > best + 1e-12) {
            best = dist;
            out.k = k;
        }
    }
    out.has_knee = best > 1e-9;
    if (!out.has_knee) out.k = curve.front().first;
    return out;
}

PartitionProfiles partition_profiles(const std::vector<InteractionSequence>& seqs,
                                     const std::vector<int>& assignments) {
    if (seqs.size() != assignments.size())
        throw DataError("partition_profiles: one assignment per sequence required");
    if (seqs.empty()) throw DataError("partition_profiles: empty population");

    std::size_t max_steps = 0;
    for (const auto& s : seqs) max_steps = std::max(max_steps, s.length());

    // Population mean/sd per (metric, step); steps with fewer than 2 members
    // cannot be z-scored and cap the profile length.
    std::vector<std::array<std::pair<double, double>, kNumMetrics>> pop(max_steps);
    std::size_t usable_steps = 0;
    for (std::size_t t = 0; t < max_steps; ++t) {
        std::size_t count = 0;
        for (const auto& s : seqs)
            if (s.length() > t) ++count;
        if (count < 2) break;
        usable_steps = t + 1;
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            double sum = 0.0, sum2 = 0.0;
            for (const auto& s : seqs) {
                if (s.length() <= t) continue;
                double v = s.sessions[t].metric(m);
                sum += v;
                sum2 += v * v;
            }
            double mean = sum / static_cast<double>(count);
            double var = (sum2 - sum * mean) / static_cast<double>(count - 1);
            pop[t][m] = {mean, std::sqrt(std::max(var, 0.0))};
        }
    }
    if (usable_steps == 0) throw DataError("partition_profiles: no step with two or more members");

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < seqs.size(); ++i) members[assignments[i]].push_back(i);

    PartitionProfiles out;
    out.max_steps = usable_steps;
    for (auto& [label, idx] : members) {
        if (idx.empty()) {
            ++out.dropped_partitions;
            continue;
        }
        out.partitions.push_back(label);
        out.cells.emplace_back();
        auto& rows = out.cells.back();
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            rows[m].resize(usable_steps);
            for (std::size_t t = 0; t < usable_steps; ++t) {
                auto [mu, sd] = pop[t][m];
                double sum = 0.0, sum2 = 0.0;
                std::size_t count = 0;
                for (std::size_t i : idx) {
                    if (seqs[i].length() <= t) continue;
                    double z = sd > 0.0 ? (seqs[i].sessions[t].metric(m) - mu) / sd : 0.0;
                    sum += z;
                    sum2 += z * z;
                    ++count;
                }
                ProfileCell cell;
                cell.n = count;
                if (count > 0) {
                    cell.mean_z = sum / static_cast<double>(count);
                    double var = count > 1
                                     ? (sum2 - sum * cell.mean_z) / static_cast<double>(count - 1)
                                     : 0.0;
                    cell.half_width = 1.96 * std::sqrt(std::max(var, 0.0) / static_cast<double>(count));
                }
                rows[m][t] = cell;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Unit transducers
// ---------------------------------------------------------------------------

TransducerCurve unit_transducer(std::span<const double> activation,
                                std::span<const double> prediction, int n_bins) {
    if (activation.size() != prediction.size())
        throw DataError("unit_transducer: length mismatch");
    if (activation.empty()) throw DataError("unit_transducer: empty input");
    if (n_bins < 1) throw DataError("unit_transducer: need at least one bin");

    std::vector<double> distinct(activation.begin(), activation.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    TransducerCurve out;
    out.reduced = distinct.size() < static_cast<std::size_t>(n_bins);
    int bins = out.reduced ? static_cast<int>(distinct.size()) : n_bins;
    out.bins_used = bins;

    double lo = distinct.front(), hi = distinct.back();
    double width = (hi > lo) ? (hi - lo) / bins : 1.0;

    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> sum2(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
    for (std::size_t i = 0; i < activation.size(); ++i) {
        int b = (hi > lo) ? std::min(bins - 1, static_cast<int>((activation[i] - lo) / width)) : 0;
        sum[static_cast<std::size_t>(b)] += prediction[i];
        sum2[static_cast<std::size_t>(b)] += prediction[i] * prediction[i];
        ++count[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
        auto ub = static_cast<std::size_t>(b);
        if (count[ub] == 0) continue;
        double mean = sum[ub] / static_cast<double>(count[ub]);
        double sem = 0.0;
        if (count[ub] > 1) {
            double var = (sum2[ub] - sum[ub] * mean) / static_cast<double>(count[ub] - 1);
            sem = std::sqrt(std::max(var, 0.0) / static_cast<double>(count[ub]));
        }
        out.bin_center.push_back(lo + (b + 0.5) * width);
        out.bin_mean.push_back(mean);
        out.bin_sem.push_back(sem);
        out.bin_count.push_back(count[ub]);
    }

    if (activation.size() >= 20) {
        out.mic_value = mic(activation, prediction).value;
    }
    out.spearman = spearman_rho(activation, prediction);
    return out;
}

// ---------------------------------------------------------------------------
// Cluster quality
// ---------------------------------------------------------------------------

double silhouette(const Tensor& points, const std::vector<int>& labels) {
    auto X = points_map(points, "silhouette");
    const std::size_t n = static_cast<std::size_t>(X.rows());
    const std::size_t d = static_cast<std::size_t>(X.cols());
    if (labels.size() != n) throw DataError("silhouette: one label per point required");

    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[labels[i]].push_back(i);
    if (groups.size() < 2) throw DataError("silhouette: need at least two clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, members] : groups) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t j : members) {
                if (j == i) continue;
                sum += std::sqrt(squared_distance(points.data() + i * d, points.data() + j * d, d));
                ++cnt;
            }
            if (label == labels[i]) {
                a = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
            } else if (cnt > 0) {
                b = std::min(b, sum / static_cast<double>(cnt));
            }
        }
        double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

Tensor standardize_columns(const Tensor& points) {
    auto X = points_map(points, "standardize");
    Tensor out = points;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double mean = X.col(j).mean();
        double var = (X.col(j).array() - mean).square().sum() /
                     std::max<double>(1.0, static_cast<double>(X.rows() - 1));
        double sd = std::sqrt(var);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                sd > 0.0 ? (X(i, j) - mean) / sd : 0.0;
    }
    return out;
}

} // namespace salience
