#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgt/config.hpp"

namespace mgt {

/// One named quantity with an acceptance window [lower, upper]; an unbounded
/// window marks a purely informational value.
struct Check {
    std::string name;
    double value = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool pass = true;

    bool informational() const;
};

Check make_check(std::string name, double value, double lower, double upper);
Check info_check(std::string name, double value);

struct RunManifest {
    std::string pipeline;
    std::string config_hash;  ///< SHA-256 of the canonical effective config
    std::string tool_version;
    std::string started;      ///< ISO-8601 UTC
    std::string finished;
    std::filesystem::path output_dir;
    std::vector<std::string> artifacts;  ///< paths relative to output_dir
    std::vector<Check> checks;

    bool passed() const;
    nlohmann::json to_json() const;
};

using LogSink = std::function<void(const std::string&)>;

/// Runs the configured pipeline end to end and writes its artifacts under
/// config.output_dir. Tables never carry timestamps, so identical inputs give
/// byte-identical CSVs.
RunManifest run_experiment(const ExperimentConfig& config, const LogSink& log = {});

/// Writes summary.txt, checks.csv and manifest.json for a list of runs and
/// returns the written paths. An empty list yields an empty summary.
std::vector<std::filesystem::path> emit_report(const std::vector<RunManifest>& runs, const std::filesystem::path& dir);

/// Default configuration for a pipeline with the settings documented in the README.
ExperimentConfig default_config(const std::string& pipeline);

}  // namespace mgt
