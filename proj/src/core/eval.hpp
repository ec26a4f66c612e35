// eval.hpp — evaluation metrics over counterfactual prediction matrices:
// overall MSE, small-source MSE, rank-weighted average (RWA), and cross-model
// average ranks.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "pipeline.hpp"

namespace ctrl {

// Predictions for every test row at every source, plus each row's actual
// source and outcome.
struct PredictionMatrix {
  std::vector<std::string> sources;  // column order
  Matrix preds;                      // n_test x |sources|
  std::vector<std::string> row_source;
  std::vector<double> outcome;

  void validate() const;
  int64_t column_of(const std::string& source) const;

  // Predictions each row received at its own source.
  std::vector<double> own_predictions() const;
};

PredictionMatrix build_prediction_matrix(const Predictor& p, const Dataset& test);

double mse(std::span<const double> pred, std::span<const double> actual);

// MSE of own-source predictions restricted to rows from the given sources.
double small_mse(const PredictionMatrix& matrix, const std::set<std::string>& small);

struct RwaResult {
  std::map<std::string, double> value;        // per model
  std::vector<std::string> eligible_sources;  // the cross-model source set M'
};

// Per model: sources rank the full test population by their column; a source
// counts rows that are both top-ranked for it and actually belong to it.
// Sources eligible under every model define the scored population.
RwaResult rwa(const std::map<std::string, PredictionMatrix>& matrices, double q = 0.2,
              int64_t min_count = 10);

struct RwaSweepRow {
  double q = 0.0;
  bool defined = false;  // false when no source clears min_count at this threshold
  std::map<std::string, double> value;
  std::vector<std::string> eligible_sources;
};

std::vector<RwaSweepRow> rwa_sweep(const std::map<std::string, PredictionMatrix>& matrices,
                                   const std::vector<double>& thresholds, int64_t min_count);

// Fractional ranks per metric (best = 1, ties share the mean rank), averaged
// across metrics per model.
std::map<std::string, double> average_ranks(
    const std::map<std::string, std::map<std::string, double>>& values_by_model,
    const std::map<std::string, bool>& higher_is_better);

std::map<std::string, double> rank_models(const std::map<std::string, double>& metric_values,
                                          bool higher_is_better);

}  // namespace ctrl
