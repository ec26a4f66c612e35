// pipeline.hpp — predictor families assembled from base learners: pooled
// global models, per-source local models, and the two-stage residual models
// (per-source TRL, per-cluster CTRL).
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "learners.hpp"

namespace ctrl {

enum class Family { global, local, trl, ctrl, rwg, jtt };

std::string family_name(Family family);
Family family_from(const std::string& name);

// A fitted model mapping (feature row, source id) to a real prediction.
// Immutable after training.
struct Predictor {
  Family family = Family::global;
  std::vector<std::string> sources;  // sorted universe; one-hot column order
  int64_t feature_dim = 0;
  std::optional<FittedModel> base;                       // pooled stage
  std::map<std::string, FittedModel> locals;             // local family
  std::map<std::string, FittedModel> residuals;          // keyed by source (trl) or cluster key (ctrl)
  std::map<std::string, std::string> cluster_key_of;     // ctrl: source -> residual key
  std::map<std::string, std::vector<std::string>> clusters;  // ctrl: source -> cluster members

  nlohmann::json to_json() const;
  static Predictor from_json(const nlohmann::json& j);
};

// Canonical name of a cluster: sorted members joined with the unit separator.
std::string cluster_key(std::vector<std::string> members);

// Pooled design: raw features followed by a one-hot source indicator in
// source_ids order. `augmented_at` sets the same indicator for every row.
Matrix augmented_features(const Dataset& ds);
Matrix augmented_at(const Matrix& X, int64_t source_pos, int64_t n_sources);

// Base-model predictions for rows of X evaluated at the given source.
std::vector<double> base_predict_at(const FittedModel& base, const Matrix& X, int64_t source_pos,
                                    int64_t n_sources);
// Base-model predictions for dataset rows at each row's own source.
std::vector<double> base_predict_own(const FittedModel& base, const Dataset& ds);

Predictor train_global(const Dataset& ds, const LearnerSpec& spec);
Predictor train_local(const Dataset& ds, const LearnerSpec& spec);
Predictor train_trl(const Dataset& ds, const LearnerSpec& base_spec, const LearnerSpec& resid_spec);
Predictor train_ctrl(const Dataset& ds, const LearnerSpec& base_spec, const LearnerSpec& resid_spec,
                     const std::map<std::string, std::vector<std::string>>& clusters);

std::vector<double> predict_at(const Predictor& p, const Matrix& X, const std::string& source);

}  // namespace ctrl
