#pragma once

#include "contrastlab/config.hpp"
#include "contrastlab/hypercube.hpp"
#include "contrastlab/textlab.hpp"

#include <set>
#include <string>

namespace contrastlab {

// Keys understood by hypercube_experiment_from_config.
const std::set<std::string>& hypercube_config_keys();

// Builds the experiment from a flat config; unset keys keep the defaults of
// HypercubeExperiment and default_arms(). Seeds are base_seed, base_seed+1, ...
HypercubeExperiment hypercube_experiment_from_config(const KeyValueConfig& cfg, std::uint64_t base_seed);

const std::set<std::string>& text_config_keys();
// p_drop has no default: it must be present in the config.
TextExperiment text_experiment_from_config(const KeyValueConfig& cfg, std::uint64_t seed);

// Text of a preset shipped with the tool, by name ("table1", "text").
const std::string& builtin_preset(const std::string& name);

}  // namespace contrastlab
