#pragma once

#include "salience/common.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace salience::tool {

/// One line per run, appended to run_manifest.jsonl in the output directory.
struct RunManifest {
    std::string subcommand;
    std::string config_path;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double duration_seconds = 0.0;

    void append(const std::string& directory) const {
        namespace fs = std::filesystem;
        fs::create_directories(directory);
        std::ofstream out(fs::path(directory) / "run_manifest.jsonl",
                          std::ios::binary | std::ios::app);
        if (!out) throw DataError("cannot append run manifest in " + directory);
        nlohmann::json j{{"subcommand", subcommand},
                         {"config", config_path},
                         {"seed", seed},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"toolkit_version", std::string(kVersion)},
                         {"duration_seconds", duration_seconds}};
        out << j.dump() << "\n";
    }
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace salience::tool
