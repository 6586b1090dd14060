#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssonmf/harness.hpp"

namespace ssonmf {

// Strict JSON mapping of ExperimentConfig. Unknown keys and type mismatches
// raise ConfigError; absent keys keep the value from `base`.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc, const ExperimentConfig& base = {});

// Named scenarios: gauss_{0.5,1.7,2.0}, nongauss_{5,15}_{0.5,1.1,2.0}, plus
// file-input presets carrying the bearing fault frequencies of the two real
// recordings (rig_vibration, conveyor_acoustic).
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Documented shape of the config document, JSON-schema style.
nlohmann::ordered_json config_schema();

struct CliConfig {
    ExperimentConfig experiment;
    std::filesystem::path out_dir = "out";
    int verbosity = 1;
    int rank = 10;  // rank used by `analyze`
    std::vector<Method> methods;  // `sweep`; empty means experiment.method
    int jobs = 1;
};

// Document layout: {"preset": name?, "experiment": {...}, "out_dir", "verbosity",
// "rank", "methods", "jobs"}.
CliConfig cli_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json cli_config_to_json(const CliConfig& config);
CliConfig load_cli_config(const std::filesystem::path& path);

RankRange parse_rank_range(const std::string& text);

}  // namespace ssonmf
