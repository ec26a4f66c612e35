// learners.hpp — supervised base learners behind one fit/predict contract.
//
// All learners support per-row weights and are deterministic functions of
// (spec, data, seed_salt). Rows are canonically ordered inside fit, so fits
// are invariant to input row permutation.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "matrix.hpp"

#include "json.hpp"

namespace ctrl {

enum class LearnerKind { ridge, tree, forest, fixed_partition_mean };

std::string learner_kind_name(LearnerKind kind);
LearnerKind learner_kind_from(const std::string& name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::ridge;
  double ridge_penalty = 1e-6;
  int64_t max_depth = 8;
  int64_t min_leaf = 5;
  int64_t n_trees = 100;
  double feature_subsample = 0.0;  // fraction of features per tree; <= 0 means ceil(sqrt(d))/d
  double row_subsample = 1.0;      // bootstrap draws per tree as a fraction of n
  uint64_t seed_salt = 0;

  void validate() const;

  nlohmann::json to_json() const;
  static LearnerSpec from_json(const nlohmann::json& j);

  bool operator==(const LearnerSpec&) const = default;
};

struct TreeNode {
  int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int32_t left = -1;
  int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Axis-aligned box with half-open per-dimension bounds [lo, hi).
struct Box {
  std::vector<std::pair<double, double>> bounds;

  bool contains(std::span<const double> x) const;
  bool operator==(const Box&) const = default;
};

struct LeafPartition {
  std::vector<Box> boxes;

  // Index of the box containing x; errors if none does.
  int64_t leaf_of(std::span<const double> x) const;
  bool operator==(const LeafPartition&) const = default;
};

struct LinearParams {
  std::vector<double> coef;
  double intercept = 0.0;
  bool operator==(const LinearParams&) const = default;
};

struct TreeParams {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  bool operator==(const TreeParams&) const = default;
};

struct ForestParams {
  std::vector<TreeParams> trees;
  bool operator==(const ForestParams&) const = default;
};

struct LeafMeanParams {
  LeafPartition partition;
  std::vector<double> values;
  double fallback = 0.0;  // prediction of leaves that saw no training rows
  bool operator==(const LeafMeanParams&) const = default;
};

class FittedModel {
public:
  FittedModel(int64_t dim, LinearParams params, std::optional<LearnerSpec> spec = {});
  FittedModel(int64_t dim, TreeParams params, std::optional<LearnerSpec> spec = {});
  FittedModel(int64_t dim, ForestParams params, std::optional<LearnerSpec> spec = {});
  FittedModel(int64_t dim, LeafMeanParams params, std::optional<LearnerSpec> spec = {});

  LearnerKind kind() const { return kind_; }
  int64_t dim() const { return dim_; }

  // The learner settings the model was fit with, including the effective seed salt.
  const std::optional<LearnerSpec>& hyperparameters() const { return spec_; }

  double predict_row(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;

  const LinearParams& linear() const;
  const TreeParams& tree() const;
  const ForestParams& forest() const;
  const LeafMeanParams& leaf_means() const;

  nlohmann::json to_json() const;
  static FittedModel from_json(const nlohmann::json& j);

  bool operator==(const FittedModel&) const = default;

private:
  LearnerKind kind_;
  int64_t dim_ = 0;
  std::variant<LinearParams, TreeParams, ForestParams, LeafMeanParams> params_;
  std::optional<LearnerSpec> spec_;
};

FittedModel fit(const LearnerSpec& spec, const Matrix& X, std::span<const double> y,
                std::span<const double> weights = {});

FittedModel fit_fixed_partition_mean(const LeafPartition& partition, const Matrix& X,
                                     std::span<const double> y,
                                     std::span<const double> weights = {});

std::vector<double> predict(const FittedModel& model, const Matrix& X);

}  // namespace ctrl
