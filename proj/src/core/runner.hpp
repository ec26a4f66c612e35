// runner.hpp — reproducible experiment runs behind the CLI: dataset synthesis,
// the model benchmark, cluster discovery reports, the distribution-shift
// simulation, and re-scoring of saved prediction matrices.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "cluster.hpp"
#include "dataset.hpp"
#include "eval.hpp"
#include "pipeline.hpp"

namespace ctrl {

struct CtrlSearchOptions {
  int64_t iters = 250;
  int64_t candidate_count = 6;  // random candidate subset size, target included
  int64_t k_max = 10;

  void validate() const;
};

struct MetricOptions {
  double rwa_q = 0.2;
  std::vector<double> rwa_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5};
  int64_t min_count = 10;

  void validate() const;
};

struct LearnerEntry {
  LearnerSpec spec;
  std::optional<LearnerSpec> residual;  // residual-stage override; defaults to spec

  const LearnerSpec& residual_spec() const { return residual ? *residual : spec; }
};

// One JSON document describes a run; no environment-variable configuration.
struct RunConfig {
  uint64_t seed = 0;
  int32_t workers = 0;
  std::optional<std::string> csv_path;
  CsvSchema schema;
  std::optional<SynthConfig> synthetic;
  double train_fraction = 1.0 / 3.0;
  std::vector<Family> families = {Family::global, Family::local, Family::trl,
                                  Family::ctrl,   Family::rwg,   Family::jtt};
  std::vector<LearnerEntry> learners;
  CtrlSearchOptions ctrl_search;
  JttConfig jtt;
  MetricOptions metrics;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  Dataset load_dataset() const;
};

// Each command writes its outputs under out_dir and removes anything it wrote
// when it fails. All outputs are deterministic in (config, seed) and
// independent of the worker count.
void run_synth(const nlohmann::json& config, const std::string& out_dir);
void run_benchmark(const nlohmann::json& config, const std::string& out_dir);
void run_cluster(const nlohmann::json& config, const std::string& out_dir,
                 const std::optional<std::string>& target);
void run_theory(const nlohmann::json& config, const std::string& out_dir);
void run_evaluate(const std::string& run_dir, const std::string& out_dir);

}  // namespace ctrl
