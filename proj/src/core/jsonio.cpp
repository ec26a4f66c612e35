#include "jsonio.hpp"

namespace ctrl {

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  return {{"n_individuals", cfg.n_individuals},
          {"n_sources", cfg.n_sources},
          {"feature_dim", cfg.feature_dim},
          {"global_weight", cfg.global_weight},
          {"local_weight", cfg.local_weight},
          {"min_source_size", cfg.min_source_size},
          {"max_source_size", cfg.max_source_size},
          {"cluster_size_min", cfg.cluster_size_min},
          {"cluster_size_max", cfg.cluster_size_max},
          {"pareto_shape", cfg.pareto_shape},
          {"clustered_fraction", cfg.clustered_fraction},
          {"feature_mean_sigma", cfg.feature_mean_sigma},
          {"feature_scale_sigma", cfg.feature_scale_sigma},
          {"weight_shift_sigma", cfg.weight_shift_sigma},
          {"signal_scale", cfg.signal_scale}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  cfg.n_individuals = j.value("n_individuals", cfg.n_individuals);
  cfg.n_sources = j.value("n_sources", cfg.n_sources);
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.global_weight = j.value("global_weight", cfg.global_weight);
  cfg.local_weight = j.value("local_weight", cfg.local_weight);
  cfg.min_source_size = j.value("min_source_size", cfg.min_source_size);
  cfg.max_source_size = j.value("max_source_size", cfg.max_source_size);
  cfg.cluster_size_min = j.value("cluster_size_min", cfg.cluster_size_min);
  cfg.cluster_size_max = j.value("cluster_size_max", cfg.cluster_size_max);
  cfg.pareto_shape = j.value("pareto_shape", cfg.pareto_shape);
  cfg.clustered_fraction = j.value("clustered_fraction", cfg.clustered_fraction);
  cfg.feature_mean_sigma = j.value("feature_mean_sigma", cfg.feature_mean_sigma);
  cfg.feature_scale_sigma = j.value("feature_scale_sigma", cfg.feature_scale_sigma);
  cfg.weight_shift_sigma = j.value("weight_shift_sigma", cfg.weight_shift_sigma);
  cfg.signal_scale = j.value("signal_scale", cfg.signal_scale);
  cfg.validate();
  return cfg;
}

nlohmann::json synth_truth_to_json(const SynthConfig& cfg, uint64_t seed, const SynthTruth& truth) {
  nlohmann::json cluster_of;
  for (const auto& [id, c] : truth.cluster_of) cluster_of[id] = c;
  nlohmann::json sizes;
  for (const auto& [id, n] : truth.sizes) sizes[id] = n;
  nlohmann::json weights;
  for (const auto& [id, w] : truth.source_weights) weights[id] = w;
  return {{"config", synth_config_to_json(cfg)},
          {"seed", seed},
          {"clusters", truth.clusters},
          {"cluster_of", std::move(cluster_of)},
          {"sizes", std::move(sizes)},
          {"global_weights", truth.global_weights},
          {"source_weights", std::move(weights)},
          {"cluster_base_weights", truth.cluster_base_weights}};
}

}  // namespace ctrl
