// synth.cpp — synthetic multi-source generator: Pareto source sizes, latent
// weight-sharing clusters, sigmoid outcome probabilities, Bernoulli outcomes.
#include <algorithm>
#include <cmath>

#include "dataset.hpp"
#include "rng.hpp"

namespace ctrl {

namespace {

std::string source_id(int64_t index, size_t width) {
  std::string digits = std::to_string(index);
  return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

// Truncated Pareto draws rescaled to sum exactly to total, each within [lo, hi].
std::vector<int64_t> draw_sizes(const SynthConfig& cfg, rng::Engine& eng) {
  const int64_t s = cfg.n_sources;
  const double lo = static_cast<double>(cfg.min_source_size);
  const double hi = static_cast<double>(cfg.max_source_size);

  std::vector<double> raw(static_cast<size_t>(s), lo);
  if (cfg.max_source_size > cfg.min_source_size) {
    const double a = cfg.pareto_shape;
    const double tail = 1.0 - std::pow(lo / hi, a);
    for (auto& r : raw) {
      double u = eng.uniform();
      r = lo * std::pow(1.0 - u * tail, -1.0 / a);
    }
  }

  double raw_sum = 0.0;
  for (double r : raw) raw_sum += r;
  const double scale = static_cast<double>(cfg.n_individuals) / raw_sum;

  std::vector<int64_t> sizes(static_cast<size_t>(s));
  int64_t sum = 0;
  for (size_t i = 0; i < raw.size(); ++i) {
    int64_t v = static_cast<int64_t>(std::llround(raw[i] * scale));
    v = std::clamp(v, cfg.min_source_size, cfg.max_source_size);
    sizes[i] = v;
    sum += v;
  }

  // Largest-remainder correction toward the exact total.
  while (sum != cfg.n_individuals) {
    const int64_t step = sum < cfg.n_individuals ? 1 : -1;
    size_t best = raw.size();
    double best_slack = 0.0;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (step > 0 && sizes[i] >= cfg.max_source_size) continue;
      if (step < 0 && sizes[i] <= cfg.min_source_size) continue;
      double slack = step * (raw[i] * scale - static_cast<double>(sizes[i]));
      if (best == raw.size() || slack > best_slack) {
        best = i;
        best_slack = slack;
      }
    }
    require(best < raw.size(), errc::internal, "synthetic: size correction stuck");
    sizes[best] += step;
    sum += step;
  }
  return sizes;
}

std::vector<double> unit_vector(int64_t dim, double norm, rng::Engine& eng) {
  std::vector<double> w(static_cast<size_t>(dim));
  double ss = 0.0;
  for (auto& v : w) {
    v = eng.normal();
    ss += v * v;
  }
  require(ss > 0.0, errc::internal, "synthetic: degenerate weight draw");
  const double f = norm / std::sqrt(ss);
  for (auto& v : w) v *= f;
  return w;
}

}  // namespace

void SynthConfig::validate() const {
  require(n_individuals >= 1, errc::invalid_argument, "synthetic: n_individuals must be >= 1");
  require(n_sources >= 1, errc::invalid_argument, "synthetic: n_sources must be >= 1");
  require(feature_dim >= 1, errc::invalid_argument, "synthetic: feature_dim must be >= 1");
  require(std::abs(global_weight + local_weight - 1.0) <= 1e-12, errc::invalid_argument,
          "synthetic: global_weight + local_weight must equal 1");
  require(global_weight >= 0.0 && global_weight <= 1.0, errc::invalid_argument,
          "synthetic: global_weight must be in [0, 1]");
  require(local_weight >= 0.0 && local_weight <= 1.0, errc::invalid_argument,
          "synthetic: local_weight must be in [0, 1]");
  require(min_source_size >= 2, errc::invalid_argument, "synthetic: min_source_size must be >= 2");
  require(max_source_size >= min_source_size, errc::invalid_argument,
          "synthetic: max_source_size must be >= min_source_size");
  require(n_sources * min_source_size <= n_individuals, errc::invalid_argument,
          "synthetic: infeasible size constraints (n_sources * min_source_size > n_individuals)");
  require(n_sources * max_source_size >= n_individuals, errc::invalid_argument,
          "synthetic: infeasible size constraints (n_sources * max_source_size < n_individuals)");
  require(cluster_size_min >= 2 && cluster_size_max >= cluster_size_min, errc::invalid_argument,
          "synthetic: cluster size range must satisfy 2 <= min <= max");
  require(pareto_shape > 0.0, errc::invalid_argument, "synthetic: pareto_shape must be > 0");
  require(clustered_fraction >= 0.0 && clustered_fraction <= 1.0, errc::invalid_argument,
          "synthetic: clustered_fraction must be in [0, 1]");
  require(feature_mean_sigma >= 0.0 && feature_scale_sigma >= 0.0 && weight_shift_sigma >= 0.0,
          errc::invalid_argument, "synthetic: perturbation sigmas must be nonnegative");
  require(signal_scale > 0.0, errc::invalid_argument, "synthetic: signal_scale must be > 0");
}

SynthResult generate_synthetic(const SynthConfig& cfg, uint64_t seed) {
  cfg.validate();

  const size_t id_width = std::max<size_t>(2, std::to_string(cfg.n_sources - 1).size());
  std::vector<std::string> ids;
  for (int64_t g = 0; g < cfg.n_sources; ++g) ids.push_back(source_id(g, id_width));

  rng::Engine size_eng(rng::derive(seed, "synth/sizes"));
  std::vector<int64_t> sizes = draw_sizes(cfg, size_eng);

  // Latent clusters over a random subset of sources.
  std::vector<int64_t> order(static_cast<size_t>(cfg.n_sources));
  for (int64_t g = 0; g < cfg.n_sources; ++g) order[static_cast<size_t>(g)] = g;
  rng::Engine cluster_eng(rng::derive(seed, "synth/clusters"));
  cluster_eng.shuffle(order);

  std::vector<std::vector<int64_t>> clusters;
  int64_t budget = std::llround(cfg.clustered_fraction * static_cast<double>(cfg.n_sources));
  size_t pos = 0;
  while (budget >= cfg.cluster_size_min &&
         static_cast<int64_t>(order.size() - pos) >= cfg.cluster_size_min) {
    int64_t span = cfg.cluster_size_min +
                   static_cast<int64_t>(cluster_eng.below(
                       static_cast<uint64_t>(cfg.cluster_size_max - cfg.cluster_size_min + 1)));
    span = std::min({span, budget, static_cast<int64_t>(order.size() - pos)});
    if (span < cfg.cluster_size_min) break;
    std::vector<int64_t> members(order.begin() + static_cast<int64_t>(pos),
                                 order.begin() + static_cast<int64_t>(pos) + span);
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
    pos += static_cast<size_t>(span);
    budget -= span;
  }
  std::sort(clusters.begin(), clusters.end());

  std::vector<int64_t> cluster_of(static_cast<size_t>(cfg.n_sources), -1);
  for (size_t c = 0; c < clusters.size(); ++c) {
    for (int64_t g : clusters[c]) cluster_of[static_cast<size_t>(g)] = static_cast<int64_t>(c);
  }

  // Weight vectors: one global, one base per cluster, one per source.
  rng::Engine gw_eng(rng::derive(seed, "synth/weights/global"));
  std::vector<double> w_global = unit_vector(cfg.feature_dim, cfg.signal_scale, gw_eng);

  std::vector<std::vector<double>> cluster_base;
  for (size_t c = 0; c < clusters.size(); ++c) {
    rng::Engine eng(rng::derive(seed, "synth/weights/cluster", static_cast<uint64_t>(c)));
    cluster_base.push_back(unit_vector(cfg.feature_dim, cfg.signal_scale, eng));
  }

  std::vector<std::vector<double>> w_source(static_cast<size_t>(cfg.n_sources));
  for (int64_t g = 0; g < cfg.n_sources; ++g) {
    rng::Engine eng(rng::derive(seed, "synth/weights/source", ids[static_cast<size_t>(g)]));
    if (cluster_of[static_cast<size_t>(g)] >= 0) {
      std::vector<double> w = cluster_base[static_cast<size_t>(cluster_of[static_cast<size_t>(g)])];
      for (auto& v : w) v += eng.normal(0.0, cfg.weight_shift_sigma);
      w_source[static_cast<size_t>(g)] = std::move(w);
    } else {
      w_source[static_cast<size_t>(g)] = unit_vector(cfg.feature_dim, cfg.signal_scale, eng);
    }
  }

  // Per-source feature distributions; clustered sources stay standard normal.
  std::vector<std::vector<double>> feat_mean(static_cast<size_t>(cfg.n_sources));
  std::vector<std::vector<double>> feat_scale(static_cast<size_t>(cfg.n_sources));
  for (int64_t g = 0; g < cfg.n_sources; ++g) {
    std::vector<double> mean(static_cast<size_t>(cfg.feature_dim), 0.0);
    std::vector<double> scale(static_cast<size_t>(cfg.feature_dim), 1.0);
    if (cluster_of[static_cast<size_t>(g)] < 0) {
      rng::Engine eng(rng::derive(seed, "synth/featdist", ids[static_cast<size_t>(g)]));
      for (int64_t j = 0; j < cfg.feature_dim; ++j) {
        mean[static_cast<size_t>(j)] = eng.normal(0.0, cfg.feature_mean_sigma);
        scale[static_cast<size_t>(j)] = std::exp(eng.normal(0.0, cfg.feature_scale_sigma));
      }
    }
    feat_mean[static_cast<size_t>(g)] = std::move(mean);
    feat_scale[static_cast<size_t>(g)] = std::move(scale);
  }

  Matrix features(cfg.n_individuals, cfg.feature_dim);
  std::vector<double> outcome(static_cast<size_t>(cfg.n_individuals));
  std::vector<std::string> source(static_cast<size_t>(cfg.n_individuals));

  int64_t row = 0;
  for (int64_t g = 0; g < cfg.n_sources; ++g) {
    rng::Engine eng(rng::derive(seed, "synth/rows", ids[static_cast<size_t>(g)]));
    const auto& w_g = w_source[static_cast<size_t>(g)];
    for (int64_t k = 0; k < sizes[static_cast<size_t>(g)]; ++k, ++row) {
      double lin_global = 0.0;
      double lin_local = 0.0;
      for (int64_t j = 0; j < cfg.feature_dim; ++j) {
        double x = feat_mean[static_cast<size_t>(g)][static_cast<size_t>(j)] +
                   feat_scale[static_cast<size_t>(g)][static_cast<size_t>(j)] * eng.normal();
        features(row, j) = x;
        lin_global += w_global[static_cast<size_t>(j)] * x;
        lin_local += w_g[static_cast<size_t>(j)] * x;
      }
      double p = 1.0 / (1.0 + std::exp(-(cfg.global_weight * lin_global + cfg.local_weight * lin_local)));
      outcome[static_cast<size_t>(row)] = eng.uniform() < p ? 1.0 : 0.0;
      source[static_cast<size_t>(row)] = ids[static_cast<size_t>(g)];
    }
  }

  SynthResult result{Dataset::make(std::move(features), std::move(outcome), std::move(source)), {}};
  result.truth.global_weights = w_global;
  result.truth.cluster_base_weights = cluster_base;
  for (size_t c = 0; c < clusters.size(); ++c) {
    std::vector<std::string> members;
    for (int64_t g : clusters[c]) members.push_back(ids[static_cast<size_t>(g)]);
    result.truth.clusters.push_back(std::move(members));
  }
  for (int64_t g = 0; g < cfg.n_sources; ++g) {
    const auto& id = ids[static_cast<size_t>(g)];
    result.truth.sizes[id] = sizes[static_cast<size_t>(g)];
    result.truth.source_weights[id] = w_source[static_cast<size_t>(g)];
    if (cluster_of[static_cast<size_t>(g)] >= 0) {
      result.truth.cluster_of[id] = cluster_of[static_cast<size_t>(g)];
    }
  }
  return result;
}

}  // namespace ctrl
