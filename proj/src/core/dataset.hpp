// dataset.hpp — data model, CSV ingestion, deterministic splitting and the
// synthetic multi-source generator.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace ctrl {

struct CsvSchema {
  std::string source_column = "source";
  std::string outcome_column = "outcome";
};

// Immutable after construction; rows partition into disjoint sources.
class Dataset {
public:
  static Dataset make(Matrix features, std::vector<double> outcome, std::vector<std::string> source,
                      std::vector<std::string> feature_names = {}, CsvSchema schema = {});

  int64_t rows() const { return features_.rows(); }
  int64_t dim() const { return features_.cols(); }

  const Matrix& features() const { return features_; }
  const std::vector<double>& outcome() const { return outcome_; }
  const std::vector<std::string>& source() const { return source_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const CsvSchema& schema() const { return schema_; }

  // Sorted unique source ids; all per-source ordering in the library follows this.
  const std::vector<std::string>& source_ids() const { return source_ids_; }
  int64_t source_count() const { return static_cast<int64_t>(source_ids_.size()); }
  bool has_source(const std::string& id) const;
  int64_t source_pos(const std::string& id) const;  // index into source_ids(); error if unknown
  const std::vector<int64_t>& rows_of(const std::string& id) const;
  int64_t source_size(const std::string& id) const;

  Dataset subset(std::span<const int64_t> row_indices) const;

  bool operator==(const Dataset& other) const;

private:
  Dataset() = default;

  Matrix features_;
  std::vector<double> outcome_;
  std::vector<std::string> source_;
  std::vector<std::string> feature_names_;
  CsvSchema schema_;
  std::vector<std::string> source_ids_;
  std::map<std::string, int64_t> source_pos_;
  std::vector<std::vector<int64_t>> rows_by_source_;
};

struct SplitPair {
  std::vector<int64_t> train_view;
  std::vector<int64_t> validation_view;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const Dataset& ds, const std::string& path);

// Per-source split: ceil(fraction * n_g) rows to train, clamped so both views
// keep at least one row. Requires every source to have >= 2 rows.
SplitPair stratified_split(const Dataset& ds, double train_fraction, uint64_t seed);

// Bottom floor(|M|/3) sources by row count; ties broken by lexicographic id.
std::vector<std::string> small_sources(const Dataset& ds);

struct SynthConfig {
  int64_t n_individuals = 40000;
  int64_t n_sources = 50;
  int64_t feature_dim = 20;
  double global_weight = 0.3;
  double local_weight = 0.7;
  int64_t min_source_size = 40;
  int64_t max_source_size = 2000;
  int64_t cluster_size_min = 2;
  int64_t cluster_size_max = 7;
  double pareto_shape = 1.5;
  double clustered_fraction = 0.5;   // share of sources grouped into latent clusters
  double feature_mean_sigma = 0.3;   // per-source feature mean perturbation (non-clustered)
  double feature_scale_sigma = 0.3;  // per-source log feature-scale perturbation (non-clustered)
  double weight_shift_sigma = 0.1;   // within-cluster weight vector shift
  double signal_scale = 2.0;         // norm of the global / local weight vectors

  void validate() const;
};

// Ground truth of the generated structure, written as the sidecar JSON.
struct SynthTruth {
  std::vector<std::vector<std::string>> clusters;
  std::map<std::string, int64_t> cluster_of;  // only clustered sources appear
  std::map<std::string, int64_t> sizes;
  std::vector<double> global_weights;
  std::map<std::string, std::vector<double>> source_weights;
  std::vector<std::vector<double>> cluster_base_weights;
};

struct SynthResult {
  Dataset data;
  SynthTruth truth;
};

SynthResult generate_synthetic(const SynthConfig& cfg, uint64_t seed);

}  // namespace ctrl
