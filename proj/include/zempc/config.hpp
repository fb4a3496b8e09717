#pragma once
// JSON configuration files for experiments and saved modified zones.

#include <filesystem>
#include <string>

#include "zempc/harness.hpp"

namespace zempc {

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

std::string modified_zone_to_json(const ModifiedZone& mz);
ModifiedZone modified_zone_from_json(const std::string& json_text);
ModifiedZone load_modified_zone(const std::filesystem::path& file);

}  // namespace zempc
