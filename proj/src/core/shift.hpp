// shift.hpp — random distribution shift model: multiplicative cell tilts of a
// target distribution, pooled fixed-leaf estimators, and Monte Carlo
// verification of the closed-form excess-risk mean.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctrl {

struct ShiftSimConfig {
  int64_t cell_count = 2000;  // fine partition size K; cells nest in leaves
  int64_t leaf_count = 10;
  std::vector<int64_t> sample_sizes;   // per-source n_m; index 0 is the target
  std::vector<double> shift_variance;  // per-source tilt variance; target's must be 0
  std::vector<double> leaf_means;
  std::vector<double> leaf_variances;  // within-leaf outcome variance under the target
  std::vector<int64_t> cluster;        // pooled source indices; must contain 0
  int64_t replicates = 500;

  int64_t source_count() const { return static_cast<int64_t>(sample_sizes.size()); }
  void validate() const;

  nlohmann::json to_json() const;
  static ShiftSimConfig from_json(const nlohmann::json& j);
};

// Limiting pool proportions: indicator-masked n_star renormalized over the
// cluster. Sums to one, supported on the cluster.
std::vector<double> cluster_beta(const std::vector<int64_t>& cluster,
                                 std::span<const double> n_star);

// Closed-form limit of K * excess risk:
// (beta' Sigma_W beta + sum_m beta_m^2 K/n_m) * sum_L Var(Y|L).
double theoretical_excess_mean(const ShiftSimConfig& cfg);

struct ExcessRiskEstimate {
  double empirical_mean = 0.0;  // mean of K * excess risk over replicates
  double standard_error = 0.0;
  double theoretical_mean = 0.0;
  double relative_gap = 0.0;
  int64_t replicates = 0;

  nlohmann::json to_json() const;
};

ExcessRiskEstimate simulate_excess_risk(const ShiftSimConfig& cfg, uint64_t seed);

}  // namespace ctrl
