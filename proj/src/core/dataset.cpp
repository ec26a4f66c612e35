#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "csv.hpp"
#include "num_format.hpp"
#include "rng.hpp"

namespace ctrl {

Dataset Dataset::make(Matrix features, std::vector<double> outcome, std::vector<std::string> source,
                      std::vector<std::string> feature_names, CsvSchema schema) {
  const int64_t n = features.rows();
  const int64_t d = features.cols();
  require(n >= 1, errc::invalid_argument, "dataset: needs at least one row");
  require(d >= 1, errc::invalid_argument, "dataset: needs at least one feature");
  require(static_cast<int64_t>(outcome.size()) == n, errc::invalid_argument,
          "dataset: outcome length does not match row count");
  require(static_cast<int64_t>(source.size()) == n, errc::invalid_argument,
          "dataset: source length does not match row count");

  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      require(std::isfinite(features(i, j)), errc::invalid_argument,
              "dataset: non-finite feature at row " + std::to_string(i + 1));
    }
    require(std::isfinite(outcome[static_cast<size_t>(i)]), errc::invalid_argument,
            "dataset: non-finite outcome at row " + std::to_string(i + 1));
  }

  if (feature_names.empty()) {
    for (int64_t j = 0; j < d; ++j) feature_names.push_back("x" + std::to_string(j));
  }
  require(static_cast<int64_t>(feature_names.size()) == d, errc::invalid_argument,
          "dataset: feature name count does not match feature dimension");

  Dataset ds;
  ds.features_ = std::move(features);
  ds.outcome_ = std::move(outcome);
  ds.source_ = std::move(source);
  ds.feature_names_ = std::move(feature_names);
  ds.schema_ = std::move(schema);

  std::set<std::string> ids(ds.source_.begin(), ds.source_.end());
  ds.source_ids_.assign(ids.begin(), ids.end());
  for (size_t k = 0; k < ds.source_ids_.size(); ++k) {
    ds.source_pos_[ds.source_ids_[k]] = static_cast<int64_t>(k);
  }
  ds.rows_by_source_.resize(ds.source_ids_.size());
  for (int64_t i = 0; i < n; ++i) {
    ds.rows_by_source_[static_cast<size_t>(ds.source_pos_.at(ds.source_[static_cast<size_t>(i)]))]
        .push_back(i);
  }
  return ds;
}

bool Dataset::has_source(const std::string& id) const { return source_pos_.count(id) != 0; }

int64_t Dataset::source_pos(const std::string& id) const {
  auto it = source_pos_.find(id);
  require(it != source_pos_.end(), errc::invalid_argument, "dataset: unknown source '" + id + "'");
  return it->second;
}

const std::vector<int64_t>& Dataset::rows_of(const std::string& id) const {
  return rows_by_source_[static_cast<size_t>(source_pos(id))];
}

int64_t Dataset::source_size(const std::string& id) const {
  return static_cast<int64_t>(rows_of(id).size());
}

Dataset Dataset::subset(std::span<const int64_t> row_indices) const {
  require(!row_indices.empty(), errc::invalid_argument, "dataset: empty subset");
  Matrix f(static_cast<int64_t>(row_indices.size()), dim());
  std::vector<double> y;
  std::vector<std::string> src;
  y.reserve(row_indices.size());
  src.reserve(row_indices.size());
  for (size_t k = 0; k < row_indices.size(); ++k) {
    int64_t i = row_indices[k];
    require(i >= 0 && i < rows(), errc::invalid_argument, "dataset: subset index out of range");
    for (int64_t j = 0; j < dim(); ++j) f(static_cast<int64_t>(k), j) = features_(i, j);
    y.push_back(outcome_[static_cast<size_t>(i)]);
    src.push_back(source_[static_cast<size_t>(i)]);
  }
  return make(std::move(f), std::move(y), std::move(src), feature_names_, schema_);
}

bool Dataset::operator==(const Dataset& other) const {
  return features_ == other.features_ && outcome_ == other.outcome_ && source_ == other.source_ &&
         feature_names_ == other.feature_names_;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  csv::Table table = csv::read_file(path);
  require(!table.rows.empty(), errc::parse, "empty dataset: " + path + " has a header but no rows");

  int64_t source_col = -1;
  int64_t outcome_col = -1;
  std::vector<int64_t> feature_cols;
  std::vector<std::string> feature_names;
  for (size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == schema.source_column) {
      require(source_col < 0, errc::parse, "duplicate source column '" + schema.source_column + "'");
      source_col = static_cast<int64_t>(j);
    } else if (table.header[j] == schema.outcome_column) {
      require(outcome_col < 0, errc::parse, "duplicate outcome column '" + schema.outcome_column + "'");
      outcome_col = static_cast<int64_t>(j);
    } else {
      feature_cols.push_back(static_cast<int64_t>(j));
      feature_names.push_back(table.header[j]);
    }
  }
  require(source_col >= 0, errc::parse, "missing source column '" + schema.source_column + "' in " + path);
  require(outcome_col >= 0, errc::parse, "missing outcome column '" + schema.outcome_column + "' in " + path);
  require(!feature_cols.empty(), errc::parse, "no feature columns in " + path);

  const int64_t n = static_cast<int64_t>(table.rows.size());
  const int64_t d = static_cast<int64_t>(feature_cols.size());
  Matrix features(n, d);
  std::vector<double> outcome(static_cast<size_t>(n));
  std::vector<std::string> source(static_cast<size_t>(n));

  auto parse_cell = [&](const std::string& cell, int64_t row, const std::string& col) {
    double v;
    if (!try_parse_double(cell, v) || !std::isfinite(v)) {
      fail_parse("unparseable value '" + cell + "' at row " + std::to_string(row + 1) + ", column '" +
                 col + "' in " + path);
    }
    return v;
  };

  for (int64_t i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    require(row.size() == table.header.size(), errc::parse,
            "row " + std::to_string(i + 1) + " has " + std::to_string(row.size()) + " fields, expected " +
                std::to_string(table.header.size()) + " in " + path);
    source[static_cast<size_t>(i)] = row[static_cast<size_t>(source_col)];
    outcome[static_cast<size_t>(i)] =
        parse_cell(row[static_cast<size_t>(outcome_col)], i, schema.outcome_column);
    for (int64_t j = 0; j < d; ++j) {
      features(i, j) = parse_cell(row[static_cast<size_t>(feature_cols[static_cast<size_t>(j)])], i,
                                  feature_names[static_cast<size_t>(j)]);
    }
  }
  return Dataset::make(std::move(features), std::move(outcome), std::move(source),
                       std::move(feature_names), schema);
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::vector<std::string> header = ds.feature_names();
  header.push_back(ds.schema().source_column);
  header.push_back(ds.schema().outcome_column);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<size_t>(ds.rows()));
  for (int64_t i = 0; i < ds.rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(static_cast<size_t>(ds.dim()) + 2);
    for (int64_t j = 0; j < ds.dim(); ++j) row.push_back(format_double(ds.features()(i, j)));
    row.push_back(ds.source()[static_cast<size_t>(i)]);
    row.push_back(format_double(ds.outcome()[static_cast<size_t>(i)]));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

SplitPair stratified_split(const Dataset& ds, double train_fraction, uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, errc::invalid_argument,
          "stratified_split: train fraction must be in (0, 1)");
  SplitPair split;
  for (const auto& id : ds.source_ids()) {
    const auto& rows = ds.rows_of(id);
    const int64_t n_g = static_cast<int64_t>(rows.size());
    require(n_g >= 2, errc::invalid_argument,
            "stratified_split: source '" + id + "' has " + std::to_string(n_g) +
                " rows; need at least 2");
    std::vector<int64_t> perm(rows.begin(), rows.end());
    rng::Engine eng(rng::derive(seed, "split", id));
    eng.shuffle(perm);
    int64_t n_train = static_cast<int64_t>(std::ceil(train_fraction * static_cast<double>(n_g)));
    n_train = std::max<int64_t>(1, std::min(n_g - 1, n_train));
    split.train_view.insert(split.train_view.end(), perm.begin(), perm.begin() + n_train);
    split.validation_view.insert(split.validation_view.end(), perm.begin() + n_train, perm.end());
  }
  std::sort(split.train_view.begin(), split.train_view.end());
  std::sort(split.validation_view.begin(), split.validation_view.end());
  return split;
}

std::vector<std::string> small_sources(const Dataset& ds) {
  std::vector<std::pair<int64_t, std::string>> by_size;
  for (const auto& id : ds.source_ids()) by_size.emplace_back(ds.source_size(id), id);
  std::sort(by_size.begin(), by_size.end());
  size_t take = by_size.size() / 3;
  std::vector<std::string> out;
  for (size_t k = 0; k < take; ++k) out.push_back(by_size[k].second);
  return out;
}

}  // namespace ctrl
