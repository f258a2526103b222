#pragma once

#include "salience/dataset.hpp"
#include "salience/layers.hpp"
#include "salience/models.hpp"

#include <memory>
#include <string>
#include <vector>

namespace salience {

/// Flat binary container: magic + record count, then per tensor
/// (name, dtype tag, shape, little-endian float64 payload).
void write_params_file(const std::string& path, const std::vector<const nn::Params*>& params);

/// Loads records by name into the given parameter list; every listed
/// parameter must be present with a matching shape.
void read_params_file(const std::string& path, const std::vector<nn::Params*>& params);

/// A trained model on disk: manifest (spec, vocabulary, scaling reference,
/// layer order) next to the parameter container and scaling stats.
struct BundlePaths {
    std::string manifest;
    std::string params;
    std::string scaling;
};

BundlePaths save_model_bundle(const std::string& directory, const std::string& name,
                              NetworkModel& model, const std::vector<std::string>& vocabulary,
                              const ScalingStats& scaling, bool encoder_only = false);

struct LoadedBundle {
    std::unique_ptr<NetworkModel> model;
    std::vector<std::string> vocabulary;
    ScalingStats scaling;
    bool encoder_only = false;
};

LoadedBundle load_model_bundle(const std::string& manifest_path);

} // namespace salience
