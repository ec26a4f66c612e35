#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rng.hpp"

namespace ctrl {

void JttConfig::validate() const {
  require(error_fraction > 0.0 && error_fraction < 1.0, errc::invalid_argument,
          "jtt: error_fraction must be in (0, 1)");
  require(upweight >= 1.0, errc::invalid_argument, "jtt: upweight must be >= 1");
}

std::vector<double> rwg_weights(const Dataset& ds) {
  const double n = static_cast<double>(ds.rows());
  const double s = static_cast<double>(ds.source_count());
  std::vector<double> w(static_cast<size_t>(ds.rows()));
  for (int64_t i = 0; i < ds.rows(); ++i) {
    const double n_g = static_cast<double>(ds.source_size(ds.source()[static_cast<size_t>(i)]));
    w[static_cast<size_t>(i)] = n / (s * n_g);
  }
  return w;
}

Predictor train_rwg(const Dataset& ds, const LearnerSpec& spec) {
  Predictor p;
  p.family = Family::rwg;
  p.sources = ds.source_ids();
  p.feature_dim = ds.dim();
  p.base = fit([&] {
    LearnerSpec s = spec;
    s.seed_salt = rng::derive(spec.seed_salt, "fit/base");
    return s;
  }(), augmented_features(ds), ds.outcome(), rwg_weights(ds));
  return p;
}

Predictor train_jtt(const Dataset& ds, const LearnerSpec& spec, const JttConfig& cfg) {
  cfg.validate();
  require(cfg.error_fraction * static_cast<double>(ds.rows()) >= 1.0, errc::invalid_argument,
          "jtt: error_fraction * n must be at least 1");

  LearnerSpec pooled = spec;
  pooled.seed_salt = rng::derive(spec.seed_salt, "fit/base");
  const Matrix X = augmented_features(ds);

  // Phase one: plain pooled fit to identify the high-error rows.
  FittedModel phase1 = fit(pooled, X, ds.outcome());
  std::vector<double> pred = phase1.predict(X);

  const int64_t n = ds.rows();
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sq(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double r = ds.outcome()[static_cast<size_t>(i)] - pred[static_cast<size_t>(i)];
    sq[static_cast<size_t>(i)] = r * r;
  }
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (sq[static_cast<size_t>(a)] != sq[static_cast<size_t>(b)]) {
      return sq[static_cast<size_t>(a)] > sq[static_cast<size_t>(b)];
    }
    return a < b;
  });

  const int64_t error_count = std::min<int64_t>(
      n, static_cast<int64_t>(std::ceil(cfg.error_fraction * static_cast<double>(n))));
  std::vector<double> weights(static_cast<size_t>(n), 1.0);
  for (int64_t k = 0; k < error_count; ++k) {
    weights[static_cast<size_t>(order[static_cast<size_t>(k)])] = cfg.upweight;
  }

  // Phase two: refit with the error set upweighted.
  Predictor p;
  p.family = Family::jtt;
  p.sources = ds.source_ids();
  p.feature_dim = ds.dim();
  p.base = fit(pooled, X, ds.outcome(), weights);
  return p;
}

}  // namespace ctrl
