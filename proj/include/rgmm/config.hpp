#pragma once

#include "rgmm/experiments.hpp"
#include "rgmm/gmm.hpp"
#include "rgmm/synthetic.hpp"

#include <filesystem>
#include <string>

namespace rgmm {

/// Plain YAML configs. Unknown keys are rejected.
SyntheticConfig parse_synthetic_config(const std::string& yaml_text);
SyntheticConfig load_synthetic_config(const std::filesystem::path& path);
std::string format_synthetic_config(const SyntheticConfig& cfg);

ExperimentSpec parse_experiment_spec(const std::string& yaml_text);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);
/// Normalised echo of every field, used in the manifest.
std::string format_experiment_spec(const ExperimentSpec& spec);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace rgmm
