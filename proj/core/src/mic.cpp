#include "salience/analysis.hpp"
#include "salience/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace salience {

namespace {

// Equipartition the y axis into up to q rows, never splitting ties; returns
// the row index per point and the number of rows actually produced.
int equipartition_y(std::span<const double> y, int q, std::vector<int>& row_of) {
    const std::size_t n = y.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });

    row_of.assign(n, 0);
    int row = 0;
    std::size_t filled = 0;    // points assigned to previous rows
    std::size_t in_row = 0;    // points assigned to the current row
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && y[order[j + 1]] == y[order[i]]) ++j;
        std::size_t tie = j - i + 1;

        double target = static_cast<double>(n - filled) / static_cast<double>(q - row);
        if (in_row > 0 && static_cast<double>(in_row) + 0.5 * static_cast<double>(tie) > target &&
            row + 1 < q) {
            ++row;
            filled += in_row;
            in_row = 0;
        }
        for (std::size_t t = i; t <= j; ++t) row_of[order[t]] = row;
        in_row += tie;
        i = j + 1;
    }
    return row + 1;
}

struct Clump {
    std::size_t size = 0;
    std::vector<std::size_t> counts; // per y row
};

// Points ordered by x; x ties are atomic, consecutive atoms merge while they
// stay pure in the same single y row (optimal boundaries never split those).
std::vector<Clump> build_clumps(std::span<const double> x, const std::vector<int>& row_of,
                                int rows, const std::vector<std::size_t>& order) {
    std::vector<Clump> clumps;
    std::size_t i = 0;
    const std::size_t n = order.size();
    int last_pure_row = -2;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;

        int pure_row = row_of[order[i]];
        for (std::size_t t = i; t <= j && pure_row >= 0; ++t)
            if (row_of[order[t]] != pure_row) pure_row = -1;

        bool merge = pure_row >= 0 && pure_row == last_pure_row && !clumps.empty();
        if (!merge) {
            clumps.emplace_back();
            clumps.back().counts.assign(static_cast<std::size_t>(rows), 0);
        }
        Clump& c = clumps.back();
        for (std::size_t t = i; t <= j; ++t) {
            ++c.counts[static_cast<std::size_t>(row_of[order[t]])];
            ++c.size;
        }
        last_pure_row = pure_row;
        i = j + 1;
    }
    return clumps;
}

// Cap the clump count by merging neighbours into at most k_hat superclumps.
std::vector<Clump> superclumps(std::vector<Clump> clumps, std::size_t k_hat) {
    if (clumps.size() <= k_hat) return clumps;
    std::size_t total = 0;
    for (const auto& c : clumps) total += c.size;

    std::vector<Clump> out;
    std::size_t acc = 0;
    for (auto& c : clumps) {
        double target = static_cast<double>(total) * static_cast<double>(out.size() + 1) /
                        static_cast<double>(k_hat);
        if (out.empty() || (static_cast<double>(acc) >= target && out.size() < k_hat)) {
            out.push_back(std::move(c));
            acc += out.back().size;
        } else {
            for (std::size_t r = 0; r < c.counts.size(); ++r) out.back().counts[r] += c.counts[r];
            out.back().size += c.size;
            acc += c.size;
        }
    }
    return out;
}

inline double xlogx(double v) { return v > 0.0 ? v * std::log2(v) : 0.0; }

// For every column count l in [2, max_cols], the best mutual information of a
// grid whose columns are unions of clumps; dynamic program over boundaries.
std::vector<double> optimize_x_axis(const std::vector<Clump>& clumps, int rows, int max_cols,
                                    std::size_t n_total) {
    const std::size_t m = clumps.size();
    const auto R = static_cast<std::size_t>(rows);

    // Prefix counts per row and prefix sizes.
    std::vector<std::vector<std::size_t>> pref(m + 1, std::vector<std::size_t>(R, 0));
    std::vector<std::size_t> psize(m + 1, 0);
    for (std::size_t c = 0; c < m; ++c) {
        psize[c + 1] = psize[c] + clumps[c].size;
        for (std::size_t r = 0; r < R; ++r) pref[c + 1][r] = pref[c][r] + clumps[c].counts[r];
    }

    // S(s, t): sum over rows of count * log2(count / interval_size) for the
    // interval of clumps (s, t]; related to -n * H(rows | column).
    auto interval_score = [&](std::size_t s, std::size_t t) {
        double size = static_cast<double>(psize[t] - psize[s]);
        if (size == 0.0) return 0.0;
        double sum = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            auto cnt = static_cast<double>(pref[t][r] - pref[s][r]);
            if (cnt > 0.0) sum += cnt * std::log2(cnt / size);
        }
        return sum;
    };

    const double neg_inf = -std::numeric_limits<double>::infinity();
    int L = std::min<int>(max_cols, static_cast<int>(m));
    // G[t][l] = best sum of interval scores partitioning the first t clumps into l columns.
    std::vector<std::vector<double>> G(m + 1, std::vector<double>(static_cast<std::size_t>(L) + 1, neg_inf));
    for (std::size_t t = 1; t <= m; ++t) G[t][1] = interval_score(0, t);
    for (int l = 2; l <= L; ++l) {
        for (std::size_t t = static_cast<std::size_t>(l); t <= m; ++t) {
            double best = neg_inf;
            for (std::size_t s = static_cast<std::size_t>(l) - 1; s < t; ++s) {
                double v = G[s][static_cast<std::size_t>(l) - 1] + interval_score(s, t);
                best = std::max(best, v);
            }
            G[t][static_cast<std::size_t>(l)] = best;
        }
    }

    // H(rows) over all points, in bits.
    double hq = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        auto cnt = static_cast<double>(pref[m][r]);
        if (cnt > 0.0) hq -= xlogx(cnt / static_cast<double>(n_total));
    }

    std::vector<double> mi(static_cast<std::size_t>(max_cols) + 1, 0.0);
    for (int l = 2; l <= L; ++l) {
        double g = G[m][static_cast<std::size_t>(l)];
        if (g == neg_inf) continue;
        mi[static_cast<std::size_t>(l)] = hq + g / static_cast<double>(n_total);
    }
    return mi;
}

double approx_mic_one_orientation(std::span<const double> x, std::span<const double> y,
                                  double grid_cap, const MicOptions& opts) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    double best = 0.0;
    int q_max = static_cast<int>(grid_cap / 2.0);
    for (int q = 2; q <= q_max; ++q) {
        std::vector<int> row_of;
        int rows = equipartition_y(y, q, row_of);
        if (rows < 2) continue;
        int max_cols = static_cast<int>(grid_cap / static_cast<double>(rows));
        if (max_cols < 2) continue;

        auto clumps = build_clumps(x, row_of, rows, order);
        auto k_hat = static_cast<std::size_t>(
            std::max(2, opts.clump_scale * max_cols));
        clumps = superclumps(std::move(clumps), k_hat);

        auto mi = optimize_x_axis(clumps, rows, max_cols, n);
        for (int l = 2; l <= max_cols; ++l) {
            double denom = std::log2(static_cast<double>(std::min(l, rows)));
            if (denom <= 0.0) continue;
            best = std::max(best, mi[static_cast<std::size_t>(l)] / denom);
        }
    }
    return best;
}

} // namespace

MicResult mic(std::span<const double> x, std::span<const double> y, MicOptions opts) {
    if (x.size() != y.size()) throw DataError("mic: length mismatch");
    if (x.size() < 20) throw DataError("mic: need at least 20 points");

    auto constant = [](std::span<const double> v) {
        for (double e : v)
            if (e != v[0]) return false;
        return true;
    };
    if (constant(x) || constant(y)) return {0.0, true};

    double grid_cap = std::max(4.0, std::pow(static_cast<double>(x.size()), opts.exponent));
    double value = std::max(approx_mic_one_orientation(x, y, grid_cap, opts),
                            approx_mic_one_orientation(y, x, grid_cap, opts));
    return {std::min(value, 1.0), false};
}

} // namespace salience
