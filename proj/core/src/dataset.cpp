#include "salience/dataset.hpp"

#include "salience/common.hpp"
#include "salience/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace salience {

namespace {

constexpr auto format_value = &format_double;

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw DataError(std::string("trailing characters in ") + what);
        return v;
    } catch (const std::exception&) {
        throw DataError(std::string("cannot parse ") + what + ": '" + s + "'");
    }
}

// Nearest-rank percentile of a sorted vector (p in (0, 100]).
double nearest_rank(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::infinity();
    auto rank = static_cast<std::size_t>(
        std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), sorted.size());
    return sorted[rank - 1];
}

} // namespace

int Dataset::intern_object(const std::string& name) {
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (objects[i] == name) return static_cast<int>(i);
    objects.push_back(name);
    return static_cast<int>(objects.size() - 1);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.objects = objects;
    out.scaling = scaling;
    out.sequences.reserve(indices.size());
    for (std::size_t i : indices) out.sequences.push_back(sequences.at(i));
    return out;
}

ScalingStats fit_scaling(const std::vector<InteractionSequence>& sequences) {
    ScalingStats stats;
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
        stats.metric[m].min = std::numeric_limits<double>::infinity();
        stats.metric[m].max = -std::numeric_limits<double>::infinity();
    }
    for (const auto& seq : sequences) {
        for (const auto& s : seq.sessions) {
            for (std::size_t m = 0; m < kNumMetrics; ++m) {
                double v = s.metric(m);
                stats.metric[m].min = std::min(stats.metric[m].min, v);
                stats.metric[m].max = std::max(stats.metric[m].max, v);
            }
        }
    }
    if (sequences.empty()) stats = ScalingStats{};
    return stats;
}

std::vector<double> min_max_scale(const std::vector<double>& values, const ScalingStats& stats) {
    if (values.size() != kNumMetrics) throw DataError("min_max_scale expects one value per metric");
    std::vector<double> out(values.size());
    for (std::size_t m = 0; m < values.size(); ++m) out[m] = stats.scale(m, values[m]);
    return out;
}

std::vector<double> min_max_unscale(const std::vector<double>& values, const ScalingStats& stats) {
    if (values.size() != kNumMetrics) throw DataError("min_max_unscale expects one value per metric");
    std::vector<double> out(values.size());
    for (std::size_t m = 0; m < values.size(); ++m) out[m] = stats.unscale(m, values[m]);
    return out;
}

Dataset percentile_filter(const Dataset& data, double p) {
    if (p <= 0.0 || p > 100.0) throw DataError("percentile_filter: p must be in (0, 100]");

    // Per-object, per-metric thresholds over every session value.
    std::map<int, std::array<std::vector<double>, kNumMetrics>> pools;
    for (const auto& seq : data.sequences)
        for (const auto& s : seq.sessions)
            for (std::size_t m = 0; m < kNumMetrics; ++m)
                pools[seq.object_id][m].push_back(s.metric(m));

    std::map<int, std::array<double, kNumMetrics>> thresholds;
    for (auto& [obj, pool] : pools) {
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            std::sort(pool[m].begin(), pool[m].end());
            thresholds[obj][m] = nearest_rank(pool[m], p);
        }
    }

    Dataset out;
    out.objects = data.objects;
    out.scaling = data.scaling;
    for (const auto& seq : data.sequences) {
        const auto& th = thresholds[seq.object_id];
        bool keep = true;
        for (const auto& s : seq.sessions) {
            for (std::size_t m = 0; m < kNumMetrics && keep; ++m)
                if (s.metric(m) > th[m]) keep = false;
            if (!keep) break;
        }
        if (keep) out.sequences.push_back(seq);
    }
    return out;
}

std::vector<std::vector<std::size_t>> bucket_batches(const Dataset& data,
                                                     std::size_t batch_size,
                                                     std::uint64_t rng_seed) {
    if (batch_size < 1) throw DataError("bucket_batches: batch_size must be >= 1");

    std::map<std::size_t, std::vector<std::size_t>> by_length;
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        by_length[data.sequences[i].length()].push_back(i);

    auto rng = make_engine(rng_seed, 0);
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [length, indices] : by_length) {
        std::shuffle(indices.begin(), indices.end(), rng);
        for (std::size_t start = 0; start < indices.size(); start += batch_size) {
            std::size_t end = std::min(start + batch_size, indices.size());
            batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                 indices.begin() + static_cast<std::ptrdiff_t>(end));
        }
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

// ---------------------------------------------------------------------------
// Record I/O
// ---------------------------------------------------------------------------

void write_dataset(std::ostream& out, const Dataset& data) {
    bool with_latent = !data.sequences.empty() && !data.sequences.front().latent_trace.empty();
    for (const auto& seq : data.sequences) {
        if (seq.latent_trace.empty() == with_latent)
            throw DataError("write_dataset: latent traces must be present for all sequences or none");
    }

    out << "agent_id,object_id,t,absence,session_time,active_time,session_activity";
    if (with_latent) out << ",latent_v";
    out << "\n";

    for (const auto& seq : data.sequences) {
        const std::string& obj = data.object_name(seq.object_id);
        for (std::size_t t = 0; t < seq.sessions.size(); ++t) {
            const auto& s = seq.sessions[t];
            out << seq.agent_id << ',' << obj << ',' << (t + 1) << ','
                << format_value(s.absence) << ',' << format_value(s.session_time) << ','
                << format_value(s.active_time) << ',' << format_value(s.session_activity);
            if (with_latent) out << ',' << format_value(seq.latent_trace[t]);
            out << "\n";
        }
    }
}

void write_dataset_file(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    write_dataset(out, data);
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset file is empty (header required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_line(line);
    bool with_latent = false;
    if (header.size() == 8 && header[7] == "latent_v") {
        with_latent = true;
    } else if (header.size() != 7) {
        throw DataError("unexpected dataset header: " + line);
    }
    static const char* expected[7] = {"agent_id", "object_id", "t", "absence",
                                      "session_time", "active_time", "session_activity"};
    for (int i = 0; i < 7; ++i)
        if (header[static_cast<std::size_t>(i)] != expected[i])
            throw DataError(std::string("unexpected dataset column: ") + header[static_cast<std::size_t>(i)]);

    Dataset data;
    std::map<std::string, std::size_t> agent_index;
    std::vector<std::vector<std::pair<int, std::pair<TelemetrySession, double>>>> rows;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != (with_latent ? 8u : 7u))
            throw DataError("wrong field count at line " + std::to_string(line_no));

        const std::string& agent = fields[0];
        int object = data.intern_object(fields[1]);
        int t = static_cast<int>(parse_double(fields[2], "t"));
        TelemetrySession s;
        s.absence = parse_double(fields[3], "absence");
        s.session_time = parse_double(fields[4], "session_time");
        s.active_time = parse_double(fields[5], "active_time");
        s.session_activity = parse_double(fields[6], "session_activity");
        if (!s.valid()) throw DataError("invalid session at line " + std::to_string(line_no));
        double latent = with_latent ? parse_double(fields[7], "latent_v") : 0.0;

        auto [it, inserted] = agent_index.try_emplace(agent, rows.size());
        if (inserted) {
            rows.emplace_back();
            data.sequences.push_back(InteractionSequence{agent, object, {}, {}});
        }
        if (data.sequences[it->second].object_id != object)
            throw DataError("agent " + agent + " appears under two objects");
        rows[it->second].push_back({t, {s, latent}});
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        std::sort(r.begin(), r.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t j = 1; j < r.size(); ++j)
            if (r[j].first == r[j - 1].first)
                throw DataError("duplicate step for agent " + data.sequences[i].agent_id);
        if (r.size() < 2)
            throw DataError("agent " + data.sequences[i].agent_id + " has fewer than 2 sessions");
        auto& seq = data.sequences[i];
        for (auto& [t, payload] : r) {
            seq.sessions.push_back(payload.first);
            if (with_latent) seq.latent_trace.push_back(payload.second);
        }
    }
    return data;
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    return read_dataset(in);
}

void write_scaling_file(const std::string& path, const ScalingStats& stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "feature,min,max\n";
    for (std::size_t m = 0; m < kNumMetrics; ++m)
        out << kMetricNames[m] << ',' << format_value(stats.metric[m].min) << ','
            << format_value(stats.metric[m].max) << "\n";
}

ScalingStats read_scaling_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open scaling stats: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("scaling stats file is empty");

    ScalingStats stats;
    std::array<bool, kNumMetrics> seen{};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 3) throw DataError("bad scaling stats row: " + line);
        bool matched = false;
        for (std::size_t m = 0; m < kNumMetrics; ++m) {
            if (fields[0] == kMetricNames[m]) {
                stats.metric[m].min = parse_double(fields[1], "min");
                stats.metric[m].max = parse_double(fields[2], "max");
                seen[m] = true;
                matched = true;
            }
        }
        if (!matched) throw DataError("unknown feature in scaling stats: " + fields[0]);
    }
    for (std::size_t m = 0; m < kNumMetrics; ++m)
        if (!seen[m]) throw DataError(std::string("scaling stats missing feature ") + kMetricNames[m]);
    return stats;
}

} // namespace salience
