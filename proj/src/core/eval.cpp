#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"

namespace ctrl {

void PredictionMatrix::validate() const {
  const int64_t n = preds.rows();
  require(n >= 1, errc::invalid_argument, "prediction matrix: needs at least one row");
  require(preds.cols() == static_cast<int64_t>(sources.size()), errc::invalid_argument,
          "prediction matrix: column count does not match source list");
  require(static_cast<int64_t>(row_source.size()) == n &&
              static_cast<int64_t>(outcome.size()) == n,
          errc::invalid_argument, "prediction matrix: row metadata length mismatch");
  for (int64_t i = 0; i < n; ++i) {
    for (double v : preds.row(i)) {
      require(std::isfinite(v), errc::invalid_argument, "prediction matrix: non-finite entry");
    }
  }
}

int64_t PredictionMatrix::column_of(const std::string& source) const {
  auto it = std::find(sources.begin(), sources.end(), source);
  require(it != sources.end(), errc::invalid_argument,
          "prediction matrix: unknown source '" + source + "'");
  return it - sources.begin();
}

std::vector<double> PredictionMatrix::own_predictions() const {
  std::vector<double> out(static_cast<size_t>(preds.rows()));
  for (int64_t i = 0; i < preds.rows(); ++i) {
    out[static_cast<size_t>(i)] = preds(i, column_of(row_source[static_cast<size_t>(i)]));
  }
  return out;
}

PredictionMatrix build_prediction_matrix(const Predictor& p, const Dataset& test) {
  PredictionMatrix m;
  m.sources = p.sources;
  m.preds = Matrix(test.rows(), static_cast<int64_t>(p.sources.size()));
  m.row_source = test.source();
  m.outcome = test.outcome();
  for (const auto& id : test.source_ids()) {
    require(std::binary_search(p.sources.begin(), p.sources.end(), id), errc::invalid_argument,
            "prediction matrix: test source '" + id + "' unknown to the predictor");
  }
  parallel::parallel_for(static_cast<int64_t>(p.sources.size()), [&](int64_t c) {
    std::vector<double> col = predict_at(p, test.features(), p.sources[static_cast<size_t>(c)]);
    for (int64_t i = 0; i < test.rows(); ++i) m.preds(i, c) = col[static_cast<size_t>(i)];
  });
  m.validate();
  return m;
}

double mse(std::span<const double> pred, std::span<const double> actual) {
  require(!pred.empty(), errc::invalid_argument, "mse: empty input");
  require(pred.size() == actual.size(), errc::invalid_argument, "mse: length mismatch");
  double total = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - actual[i];
    total += diff * diff;
  }
  return total / static_cast<double>(pred.size());
}

double small_mse(const PredictionMatrix& matrix, const std::set<std::string>& small) {
  matrix.validate();
  require(!small.empty(), errc::invalid_argument, "small_mse: empty source set");
  std::vector<double> pred;
  std::vector<double> actual;
  const std::vector<double> own = matrix.own_predictions();
  for (size_t i = 0; i < matrix.row_source.size(); ++i) {
    if (small.count(matrix.row_source[i]) != 0) {
      pred.push_back(own[i]);
      actual.push_back(matrix.outcome[i]);
    }
  }
  require(!pred.empty(), errc::domain, "small_mse: no test rows in the given sources");
  return mse(pred, actual);
}

namespace {

// Rows that are top-ranked in the given column and actually belong to that
// column's source. Ranking ties break toward the lower row index.
std::vector<int64_t> eligible_rows(const PredictionMatrix& m, int64_t col, int64_t top_count) {
  const int64_t n = m.preds.rows();
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (m.preds(a, col) != m.preds(b, col)) return m.preds(a, col) > m.preds(b, col);
    return a < b;
  });
  std::vector<int64_t> out;
  const std::string& source = m.sources[static_cast<size_t>(col)];
  for (int64_t k = 0; k < top_count; ++k) {
    const int64_t row = order[static_cast<size_t>(k)];
    if (m.row_source[static_cast<size_t>(row)] == source) out.push_back(row);
  }
  return out;
}

}  // namespace

RwaResult rwa(const std::map<std::string, PredictionMatrix>& matrices, double q, int64_t min_count) {
  require(!matrices.empty(), errc::invalid_argument, "rwa: no prediction matrices");
  require(q > 0.0 && q <= 1.0, errc::invalid_argument, "rwa: q must be in (0, 1]");
  require(min_count >= 1, errc::invalid_argument, "rwa: min_count must be >= 1");

  const PredictionMatrix& first = matrices.begin()->second;
  first.validate();
  for (const auto& [name, m] : matrices) {
    m.validate();
    require(m.sources == first.sources && m.row_source == first.row_source &&
                m.outcome == first.outcome,
            errc::invalid_argument, "rwa: matrices must share rows and columns ('" + name + "')");
  }

  const int64_t n = first.preds.rows();
  const int64_t top_count =
      std::min<int64_t>(n, static_cast<int64_t>(std::ceil(q * static_cast<double>(n))));

  // eligible[model][source] = rows top-ranked for that source and assigned to it
  std::map<std::string, std::map<std::string, std::vector<int64_t>>> eligible;
  for (const auto& [name, m] : matrices) {
    for (size_t c = 0; c < m.sources.size(); ++c) {
      eligible[name][m.sources[c]] = eligible_rows(m, static_cast<int64_t>(c), top_count);
    }
  }

  // M' = sources whose eligible count clears min_count under every model.
  std::vector<std::string> selected;
  for (const auto& source : first.sources) {
    bool ok = true;
    for (const auto& [name, per_source] : eligible) {
      if (static_cast<int64_t>(per_source.at(source).size()) < min_count) {
        ok = false;
        break;
      }
    }
    if (ok) selected.push_back(source);
  }
  require(!selected.empty(), errc::domain,
          "rwa: no source keeps at least " + std::to_string(min_count) +
              " of its own rows in the top set under every model");

  RwaResult result;
  result.eligible_sources = selected;
  for (const auto& [name, per_source] : eligible) {
    std::set<int64_t> rows;
    for (const auto& source : selected) {
      const auto& r = per_source.at(source);
      rows.insert(r.begin(), r.end());
    }
    double total = 0.0;
    for (int64_t i : rows) total += first.outcome[static_cast<size_t>(i)];
    result.value[name] = total / static_cast<double>(rows.size());
  }
  return result;
}

std::vector<RwaSweepRow> rwa_sweep(const std::map<std::string, PredictionMatrix>& matrices,
                                   const std::vector<double>& thresholds, int64_t min_count) {
  require(!thresholds.empty(), errc::invalid_argument, "rwa_sweep: no thresholds");
  std::vector<RwaSweepRow> rows;
  for (double q : thresholds) {
    RwaSweepRow row;
    row.q = q;
    try {
      RwaResult r = rwa(matrices, q, min_count);
      row.defined = true;
      row.value = std::move(r.value);
      row.eligible_sources = std::move(r.eligible_sources);
    } catch (const error& e) {
      if (e.code() != errc::domain) throw;
      row.defined = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, double> rank_models(const std::map<std::string, double>& metric_values,
                                          bool higher_is_better) {
  require(metric_values.size() >= 2, errc::invalid_argument, "ranks: need at least two models");
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [name, value] : metric_values) {
    require(std::isfinite(value), errc::invalid_argument, "ranks: non-finite metric value");
    order.emplace_back(higher_is_better ? -value : value, name);
  }
  std::sort(order.begin(), order.end());

  std::map<std::string, double> ranks;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && order[j].first == order[i].first) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) ranks[order[k].second] = shared;
    i = j;
  }
  return ranks;
}

std::map<std::string, double> average_ranks(
    const std::map<std::string, std::map<std::string, double>>& values_by_model,
    const std::map<std::string, bool>& higher_is_better) {
  require(values_by_model.size() >= 2, errc::invalid_argument,
          "average_ranks: need at least two models");
  require(!higher_is_better.empty(), errc::invalid_argument, "average_ranks: no metrics");

  std::map<std::string, double> totals;
  for (const auto& [metric, higher] : higher_is_better) {
    std::map<std::string, double> metric_values;
    for (const auto& [model, values] : values_by_model) {
      auto it = values.find(metric);
      require(it != values.end(), errc::invalid_argument,
              "average_ranks: model '" + model + "' is missing metric '" + metric + "'");
      metric_values[model] = it->second;
    }
    for (const auto& [model, rank] : rank_models(metric_values, higher)) totals[model] += rank;
  }
  for (auto& [model, total] : totals) total /= static_cast<double>(higher_is_better.size());
  return totals;
}

}  // namespace ctrl
