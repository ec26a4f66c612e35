#include "shift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace ctrl {

void ShiftSimConfig::validate() const {
  require(cell_count >= 1 && leaf_count >= 1, errc::invalid_argument,
          "shift: cell_count and leaf_count must be >= 1");
  require(cell_count % leaf_count == 0, errc::invalid_argument,
          "shift: cell_count must be divisible by leaf_count");
  require(!sample_sizes.empty(), errc::invalid_argument, "shift: no sources");
  for (int64_t n : sample_sizes) {
    require(n >= 1, errc::invalid_argument, "shift: sample sizes must be >= 1");
  }
  require(shift_variance.size() == sample_sizes.size(), errc::invalid_argument,
          "shift: shift_variance length must match sample_sizes");
  for (double v : shift_variance) {
    require(std::isfinite(v) && v >= 0.0, errc::invalid_argument,
            "shift: shift variances must be nonnegative");
  }
  require(shift_variance[0] == 0.0, errc::invalid_argument,
          "shift: the target source must have zero shift variance");
  require(static_cast<int64_t>(leaf_means.size()) == leaf_count, errc::invalid_argument,
          "shift: leaf_means length must equal leaf_count");
  require(static_cast<int64_t>(leaf_variances.size()) == leaf_count, errc::invalid_argument,
          "shift: leaf_variances length must equal leaf_count");
  bool any_variance = false;
  for (double v : leaf_variances) {
    require(std::isfinite(v) && v >= 0.0, errc::invalid_argument,
            "shift: leaf variances must be nonnegative");
    any_variance = any_variance || v > 0.0;
  }
  if (any_variance) {
    require((cell_count / leaf_count) % 2 == 0, errc::invalid_argument,
            "shift: cells per leaf must be even to realize the leaf variances exactly");
  }
  require(!cluster.empty(), errc::invalid_argument, "shift: empty cluster");
  std::set<int64_t> seen;
  for (int64_t m : cluster) {
    require(m >= 0 && m < source_count(), errc::invalid_argument,
            "shift: cluster index out of range");
    require(seen.insert(m).second, errc::invalid_argument, "shift: duplicate cluster index");
  }
  require(seen.count(0) != 0, errc::invalid_argument, "shift: cluster must contain the target");
  require(replicates >= 1, errc::invalid_argument, "shift: replicates must be >= 1");
}

std::vector<double> cluster_beta(const std::vector<int64_t>& cluster,
                                 std::span<const double> n_star) {
  require(!cluster.empty(), errc::invalid_argument, "cluster_beta: empty cluster");
  double total = 0.0;
  for (int64_t m : cluster) {
    require(m >= 0 && m < static_cast<int64_t>(n_star.size()), errc::invalid_argument,
            "cluster_beta: index out of range");
    require(n_star[static_cast<size_t>(m)] > 0.0, errc::invalid_argument,
            "cluster_beta: proportions must be positive on the cluster");
    total += n_star[static_cast<size_t>(m)];
  }
  std::vector<double> beta(n_star.size(), 0.0);
  for (int64_t m : cluster) {
    beta[static_cast<size_t>(m)] = n_star[static_cast<size_t>(m)] / total;
  }
  return beta;
}

double theoretical_excess_mean(const ShiftSimConfig& cfg) {
  cfg.validate();
  double n_total = 0.0;
  for (int64_t n : cfg.sample_sizes) n_total += static_cast<double>(n);
  std::vector<double> n_star(cfg.sample_sizes.size());
  for (size_t m = 0; m < cfg.sample_sizes.size(); ++m) {
    n_star[m] = static_cast<double>(cfg.sample_sizes[m]) / n_total;
  }
  const std::vector<double> beta = cluster_beta(cfg.cluster, n_star);

  double shift_term = 0.0;  // beta' Sigma_W beta with independent shifts
  double size_term = 0.0;
  for (size_t m = 0; m < beta.size(); ++m) {
    shift_term += beta[m] * beta[m] * cfg.shift_variance[m];
    size_term += beta[m] * beta[m] * static_cast<double>(cfg.cell_count) /
                 static_cast<double>(cfg.sample_sizes[m]);
  }
  double var_sum = 0.0;
  for (double v : cfg.leaf_variances) var_sum += v;
  return (shift_term + size_term) * var_sum;
}

ExcessRiskEstimate simulate_excess_risk(const ShiftSimConfig& cfg, uint64_t seed) {
  cfg.validate();
  const int64_t K = cfg.cell_count;
  const int64_t n_leaves = cfg.leaf_count;
  const int64_t cells_per_leaf = K / n_leaves;

  // Cell outcomes realize each leaf's mean and variance exactly: half the
  // cells sit one standard deviation above the mean, half below.
  std::vector<double> cell_value(static_cast<size_t>(K));
  for (int64_t leaf = 0; leaf < n_leaves; ++leaf) {
    const double sd = std::sqrt(cfg.leaf_variances[static_cast<size_t>(leaf)]);
    for (int64_t c = 0; c < cells_per_leaf; ++c) {
      const int64_t k = leaf * cells_per_leaf + c;
      cell_value[static_cast<size_t>(k)] =
          cfg.leaf_means[static_cast<size_t>(leaf)] + (c % 2 == 0 ? sd : -sd);
    }
  }

  std::vector<int64_t> cluster = cfg.cluster;
  std::sort(cluster.begin(), cluster.end());
  double cluster_n = 0.0;
  for (int64_t m : cluster) cluster_n += static_cast<double>(cfg.sample_sizes[static_cast<size_t>(m)]);

  std::vector<double> scaled_excess(static_cast<size_t>(cfg.replicates));

  parallel::parallel_for(cfg.replicates, [&](int64_t rep) {
    rng::Engine eng(rng::derive(seed, "shift/replicate", static_cast<uint64_t>(rep)));

    // estimate_L accumulates the size-weighted per-source leaf sample means.
    std::vector<double> estimate(static_cast<size_t>(n_leaves), 0.0);
    std::vector<double> cum(static_cast<size_t>(K));
    std::vector<double> leaf_sum(static_cast<size_t>(n_leaves));
    std::vector<int64_t> leaf_n(static_cast<size_t>(n_leaves));

    for (int64_t m : cluster) {
      const double sigma2 = cfg.shift_variance[static_cast<size_t>(m)];
      double total = 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double w = sigma2 > 0.0 ? eng.gamma(1.0 / sigma2, sigma2) : 1.0;
        total += w;
        cum[static_cast<size_t>(k)] = total;
      }

      std::fill(leaf_sum.begin(), leaf_sum.end(), 0.0);
      std::fill(leaf_n.begin(), leaf_n.end(), 0);
      const int64_t n_m = cfg.sample_sizes[static_cast<size_t>(m)];
      for (int64_t i = 0; i < n_m; ++i) {
        const double u = eng.uniform() * total;
        const int64_t cell = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        const int64_t k = std::min<int64_t>(cell, K - 1);
        leaf_sum[static_cast<size_t>(k / cells_per_leaf)] += cell_value[static_cast<size_t>(k)];
        leaf_n[static_cast<size_t>(k / cells_per_leaf)] += 1;
      }

      const double weight = static_cast<double>(n_m) / cluster_n;
      for (int64_t leaf = 0; leaf < n_leaves; ++leaf) {
        require(leaf_n[static_cast<size_t>(leaf)] > 0, errc::domain,
                "shift: source " + std::to_string(m) + " drew no observations in leaf " +
                    std::to_string(leaf) + "; increase sample sizes");
        estimate[static_cast<size_t>(leaf)] += weight * leaf_sum[static_cast<size_t>(leaf)] /
                                               static_cast<double>(leaf_n[static_cast<size_t>(leaf)]);
      }
    }

    double excess = 0.0;
    for (int64_t leaf = 0; leaf < n_leaves; ++leaf) {
      const double diff = cfg.leaf_means[static_cast<size_t>(leaf)] - estimate[static_cast<size_t>(leaf)];
      excess += diff * diff;
    }
    excess /= static_cast<double>(n_leaves);
    scaled_excess[static_cast<size_t>(rep)] = static_cast<double>(K) * excess;
  });

  ExcessRiskEstimate est;
  est.replicates = cfg.replicates;
  est.theoretical_mean = theoretical_excess_mean(cfg);
  for (double v : scaled_excess) est.empirical_mean += v;
  est.empirical_mean /= static_cast<double>(cfg.replicates);
  if (cfg.replicates > 1) {
    double ss = 0.0;
    for (double v : scaled_excess) {
      const double diff = v - est.empirical_mean;
      ss += diff * diff;
    }
    est.standard_error = std::sqrt(ss / static_cast<double>(cfg.replicates - 1)) /
                         std::sqrt(static_cast<double>(cfg.replicates));
  }
  if (est.theoretical_mean != 0.0) {
    est.relative_gap = std::abs(est.empirical_mean - est.theoretical_mean) /
                       std::abs(est.theoretical_mean);
  } else {
    est.relative_gap = est.empirical_mean == 0.0 ? 0.0
                                                 : std::numeric_limits<double>::infinity();
  }
  return est;
}

nlohmann::json ShiftSimConfig::to_json() const {
  return {{"cell_count", cell_count},
          {"leaf_count", leaf_count},
          {"sample_sizes", sample_sizes},
          {"shift_variance", shift_variance},
          {"leaf_means", leaf_means},
          {"leaf_variances", leaf_variances},
          {"cluster", cluster},
          {"replicates", replicates}};
}

ShiftSimConfig ShiftSimConfig::from_json(const nlohmann::json& j) {
  ShiftSimConfig cfg;
  cfg.cell_count = j.value("cell_count", cfg.cell_count);
  cfg.leaf_count = j.value("leaf_count", cfg.leaf_count);
  cfg.sample_sizes = j.at("sample_sizes").get<std::vector<int64_t>>();
  if (j.contains("shift_variance")) {
    if (j.at("shift_variance").is_number()) {
      cfg.shift_variance.assign(cfg.sample_sizes.size(), j.at("shift_variance").get<double>());
      if (!cfg.shift_variance.empty()) cfg.shift_variance[0] = 0.0;
    } else {
      cfg.shift_variance = j.at("shift_variance").get<std::vector<double>>();
    }
  } else {
    cfg.shift_variance.assign(cfg.sample_sizes.size(), 0.0);
  }
  auto broadcast = [&](const char* key, double fallback) {
    std::vector<double> out(static_cast<size_t>(cfg.leaf_count), fallback);
    if (j.contains(key)) {
      if (j.at(key).is_number()) {
        out.assign(static_cast<size_t>(cfg.leaf_count), j.at(key).get<double>());
      } else {
        out = j.at(key).get<std::vector<double>>();
      }
    }
    return out;
  };
  cfg.leaf_means = broadcast("leaf_means", 0.0);
  cfg.leaf_variances = broadcast("leaf_variances", 1.0);
  if (j.contains("cluster")) {
    cfg.cluster = j.at("cluster").get<std::vector<int64_t>>();
  } else {
    cfg.cluster.resize(cfg.sample_sizes.size());
    for (size_t m = 0; m < cfg.sample_sizes.size(); ++m) cfg.cluster[m] = static_cast<int64_t>(m);
  }
  cfg.replicates = j.value("replicates", cfg.replicates);
  cfg.validate();
  return cfg;
}

nlohmann::json ExcessRiskEstimate::to_json() const {
  return {{"empirical_mean", empirical_mean},
          {"standard_error", standard_error},
          {"theoretical_mean", theoretical_mean},
          {"relative_gap", relative_gap},
          {"replicates", replicates}};
}

}  // namespace ctrl
