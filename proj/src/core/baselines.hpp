// baselines.hpp — comparison methods beyond global/local/TRL: equal-mass
// source reweighting (RWG) and two-phase error upweighting (JTT).
#pragma once

#include "dataset.hpp"
#include "pipeline.hpp"

namespace ctrl {

struct JttConfig {
  double error_fraction = 0.2;  // share of rows treated as the error set
  double upweight = 5.0;

  void validate() const;
};

// Row weights giving every source equal total mass; mass sums to n, so
// equal-size sources reduce to unit weights.
std::vector<double> rwg_weights(const Dataset& ds);

Predictor train_rwg(const Dataset& ds, const LearnerSpec& spec);
Predictor train_jtt(const Dataset& ds, const LearnerSpec& spec, const JttConfig& cfg);

}  // namespace ctrl
