#pragma once
// Named experiments with the published hyperparameters.

#include "qrl/config.hpp"

#include <string>
#include <vector>

namespace qrl {

std::vector<std::string> experiment_names();

// Throws ConfigError listing the known names when `name` is unknown.
ExperimentConfig registry_lookup(const std::string& name);

// Desk-scale reduction: for scale < 1, N becomes desk_N and B, epochs and eval_interval
// are multiplied by scale (rounded up). scale = 1 leaves the config unchanged.
void apply_scale(ExperimentConfig& cfg, double scale);

}  // namespace qrl
