#pragma once

#include "salience/analysis.hpp"
#include "salience/common.hpp"
#include "salience/telemetry.hpp"
#include "salience/tensor.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace salience::tool {

/// Per-step encoder outputs for every agent with enough observed sessions.
struct RepresentationTable {
    std::vector<std::string> agents;
    std::vector<std::string> objects;
    std::vector<int> steps;
    std::vector<double> latent_v; // NaN when the dataset carries no trace
    nn::Tensor values;            // [rows, h]
};

/// Per-step original-unit predictions, five columns per row.
struct PredictionTable {
    std::vector<std::string> agents;
    std::vector<std::string> objects;
    std::vector<int> steps;
    std::vector<std::array<double, kNumTargets>> values;
};

inline void write_representations(const std::string& path, const RepresentationTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    const std::size_t h = table.values.rank() == 2 ? table.values.dim(1) : 0;
    out << "agent_id,object_id,t,latent_v";
    for (std::size_t u = 0; u < h; ++u) out << ",h" << u;
    out << "\n";
    for (std::size_t r = 0; r < table.agents.size(); ++r) {
        out << table.agents[r] << ',' << table.objects[r] << ',' << table.steps[r] << ','
            << format_double(table.latent_v[r]);
        for (std::size_t u = 0; u < h; ++u) out << ',' << format_double(table.values.at(r, u));
        out << "\n";
    }
}

inline RepresentationTable read_representations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open representations: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("representations file is empty");
    std::size_t h = 0;
    {
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 5) throw DataError("unexpected representations header");
        h = fields.size() - 4;
    }
    RepresentationTable table;
    std::vector<double> flat;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != h + 4) throw DataError("bad representations row: " + line);
        table.agents.push_back(fields[0]);
        table.objects.push_back(fields[1]);
        table.steps.push_back(std::stoi(fields[2]));
        table.latent_v.push_back(std::stod(fields[3]));
        for (std::size_t u = 0; u < h; ++u) flat.push_back(std::stod(fields[4 + u]));
    }
    table.values = nn::Tensor({table.agents.size(), h}, std::move(flat));
    return table;
}

inline void write_predictions(const std::string& path, const PredictionTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "agent_id,object_id,t";
    for (auto* name : kTargetNames) out << ',' << name;
    out << "\n";
    for (std::size_t r = 0; r < table.agents.size(); ++r) {
        out << table.agents[r] << ',' << table.objects[r] << ',' << table.steps[r];
        for (double v : table.values[r]) out << ',' << format_double(v);
        out << "\n";
    }
}

inline PredictionTable read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("predictions file is empty");
    PredictionTable table;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 3 + kNumTargets) throw DataError("bad predictions row: " + line);
        table.agents.push_back(fields[0]);
        table.objects.push_back(fields[1]);
        table.steps.push_back(std::stoi(fields[2]));
        std::array<double, kNumTargets> v{};
        for (std::size_t k = 0; k < kNumTargets; ++k) v[k] = std::stod(fields[3 + k]);
        table.values.push_back(v);
    }
    return table;
}

/// Minimal SVG scatter for quick inspection of embeddings and partitions.
inline void write_scatter_svg(const std::string& path, const nn::Tensor& points,
                              const std::vector<int>& color_ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    const std::size_t n = points.dim(0);
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        min_x = std::min(min_x, points.at(i, 0));
        max_x = std::max(max_x, points.at(i, 0));
        min_y = std::min(min_y, points.at(i, 1));
        max_y = std::max(max_y, points.at(i, 1));
    }
    double span_x = std::max(max_x - min_x, 1e-12), span_y = std::max(max_y - min_y, 1e-12);
    static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                    "#59a14f", "#edc948", "#b07aa1", "#9c755f"};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='640' "
           "viewBox='0 0 640 640'>\n<rect width='640' height='640' fill='white'/>\n";
    for (std::size_t i = 0; i < n; ++i) {
        double x = 20.0 + 600.0 * (points.at(i, 0) - min_x) / span_x;
        double y = 620.0 - 600.0 * (points.at(i, 1) - min_y) / span_y;
        const char* color = palette[static_cast<std::size_t>(color_ids[i] % 8)];
        out << "<circle cx='" << x << "' cy='" << y << "' r='2' fill='" << color
            << "' fill-opacity='0.6'/>\n";
    }
    out << "</svg>\n";
}

} // namespace salience::tool
