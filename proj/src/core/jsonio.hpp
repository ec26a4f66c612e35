// jsonio.hpp — JSON bindings for dataset-module types.
#pragma once

#include "dataset.hpp"

#include "json.hpp"

namespace ctrl {

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

// Sidecar document: config, seed and the latent structure (the ground truth
// used by recovery tests).
nlohmann::json synth_truth_to_json(const SynthConfig& cfg, uint64_t seed, const SynthTruth& truth);

}  // namespace ctrl
