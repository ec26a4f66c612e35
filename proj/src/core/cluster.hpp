// cluster.hpp — data-driven cluster discovery: binary subset selection by
// exhaustive enumeration over restricted candidate sets, stability selection
// over repeated splits, and incremental cluster sizing with the one
// standard-error rule.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "learners.hpp"

namespace ctrl {

// One subset-selection problem for a target source g: residuals of g's
// validation rows, per-candidate residual predictions for those rows, and
// candidate training sizes.
struct SubsetInstance {
  std::vector<double> target_residuals;   // length v
  Matrix residual_preds;                  // v x |candidates|
  std::vector<double> sizes;              // |candidates|, strictly positive
  std::vector<std::string> candidates;    // contains the target
  int64_t target_index = 0;

  void validate() const;

  nlohmann::json to_json() const;
  static SubsetInstance from_json(const nlohmann::json& j);
};

// Sum over validation rows of squared error between the target residual and
// the size-weighted average of selected candidates' residual predictions.
double subset_objective(const SubsetInstance& inst, const std::vector<uint8_t>& z);

struct SubsetSolution {
  std::vector<uint8_t> z;
  double objective = 0.0;
};

// Exhaustive minimization over all subsets containing the target. Ties go to
// the smaller cardinality, then the lexicographically smallest id set.
SubsetSolution solve_subset(const SubsetInstance& inst);

// Enumeration guard; the candidate sets used in practice hold 5-7 sources.
inline constexpr int64_t kMaxSubsetCandidates = 20;

struct StabilityCounts {
  int64_t selected = 0;
  int64_t candidate = 0;
};

struct StabilityWeights {
  std::string target;
  std::map<std::string, double> w;  // selected / candidate, zero if never drawn
  std::map<std::string, StabilityCounts> counts;

  nlohmann::json to_json() const;
  static StabilityWeights from_json(const nlohmann::json& j);
};

// Repeated-split selection frequencies for clustering the target source.
StabilityWeights stability_weights(const Dataset& ds, const std::string& target,
                                   const LearnerSpec& base_spec, const LearnerSpec& resid_spec,
                                   int64_t iters, int64_t candidate_count, uint64_t seed);

struct OneSeResult {
  int64_t k_min = 1;  // 1-based index of the minimum mean
  double cutoff = 0.0;
  int64_t k_star = 1;  // smallest k whose mean is within one SE of the minimum
};

OneSeResult one_se_rule(std::span<const double> means, std::span<const double> ses);

struct ClusterReport {
  std::string target;
  std::vector<std::string> ranked;  // descending stability weight, target first
  std::vector<double> mse_mean;     // per cluster size k = 1..k_used
  std::vector<double> mse_se;
  int64_t k_min = 1;
  double cutoff = 0.0;
  int64_t k_star = 1;
  std::vector<std::string> cluster;  // top k_star of the ranking

  nlohmann::json to_json() const;
  static ClusterReport from_json(const nlohmann::json& j);

  // Plot-ready per-k curve: k, mse_mean, mse_se.
  std::vector<std::vector<std::string>> curve_rows() const;
};

ClusterReport select_cluster(const Dataset& ds, const std::string& target,
                             const StabilityWeights& weights, const LearnerSpec& base_spec,
                             const LearnerSpec& resid_spec, int64_t iters, int64_t k_max,
                             uint64_t seed);

}  // namespace ctrl
