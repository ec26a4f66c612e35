#include "cluster.hpp"

#include <algorithm>
#include <cmath>

#include "num_format.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "rng.hpp"

namespace ctrl {

void SubsetInstance::validate() const {
  const int64_t v = static_cast<int64_t>(target_residuals.size());
  const int64_t c = static_cast<int64_t>(candidates.size());
  require(v >= 1, errc::invalid_argument, "subset: needs at least one validation row");
  require(c >= 1, errc::invalid_argument, "subset: needs at least one candidate");
  require(residual_preds.rows() == v && residual_preds.cols() == c, errc::invalid_argument,
          "subset: residual prediction matrix shape mismatch");
  require(static_cast<int64_t>(sizes.size()) == c, errc::invalid_argument,
          "subset: size vector length mismatch");
  for (double n : sizes) {
    require(std::isfinite(n) && n > 0.0, errc::invalid_argument,
            "subset: candidate sizes must be positive");
  }
  require(target_index >= 0 && target_index < c, errc::invalid_argument,
          "subset: target index out of range");
}

double subset_objective(const SubsetInstance& inst, const std::vector<uint8_t>& z) {
  inst.validate();
  require(z.size() == inst.candidates.size(), errc::invalid_argument,
          "subset: decision vector length mismatch");
  require(z[static_cast<size_t>(inst.target_index)] != 0, errc::invalid_argument,
          "subset: the target must stay selected");

  double size_sum = 0.0;
  for (size_t m = 0; m < z.size(); ++m) {
    if (z[m]) size_sum += inst.sizes[m];
  }

  double total = 0.0;
  for (int64_t i = 0; i < inst.residual_preds.rows(); ++i) {
    double num = 0.0;
    for (size_t m = 0; m < z.size(); ++m) {
      if (z[m]) num += inst.residual_preds(i, static_cast<int64_t>(m)) * inst.sizes[m];
    }
    const double diff = inst.target_residuals[static_cast<size_t>(i)] - num / size_sum;
    total += diff * diff;
  }
  return total;
}

SubsetSolution solve_subset(const SubsetInstance& inst) {
  inst.validate();
  const int64_t c = static_cast<int64_t>(inst.candidates.size());
  require(c <= kMaxSubsetCandidates, errc::invalid_argument,
          "subset: candidate count " + std::to_string(c) + " exceeds the enumeration guard");

  // Free positions exclude the target, which is always on.
  std::vector<int64_t> free_pos;
  for (int64_t m = 0; m < c; ++m) {
    if (m != inst.target_index) free_pos.push_back(m);
  }

  auto included_ids = [&](const std::vector<uint8_t>& z) {
    std::vector<std::string> ids;
    for (size_t m = 0; m < z.size(); ++m) {
      if (z[m]) ids.push_back(inst.candidates[m]);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  SubsetSolution best;
  int64_t best_card = 0;
  std::vector<std::string> best_ids;
  bool have_best = false;

  std::vector<uint8_t> z(static_cast<size_t>(c), 0);
  const uint64_t masks = uint64_t{1} << free_pos.size();
  for (uint64_t mask = 0; mask < masks; ++mask) {
    std::fill(z.begin(), z.end(), 0);
    z[static_cast<size_t>(inst.target_index)] = 1;
    int64_t card = 1;
    for (size_t b = 0; b < free_pos.size(); ++b) {
      if (mask & (uint64_t{1} << b)) {
        z[static_cast<size_t>(free_pos[b])] = 1;
        ++card;
      }
    }
    const double obj = subset_objective(inst, z);
    bool better = false;
    if (!have_best || obj < best.objective) {
      better = true;
    } else if (obj == best.objective) {
      if (card < best_card) {
        better = true;
      } else if (card == best_card) {
        better = included_ids(z) < best_ids;
      }
    }
    if (better) {
      best.z = z;
      best.objective = obj;
      best_card = card;
      best_ids = included_ids(z);
      have_best = true;
    }
  }
  return best;
}

nlohmann::json SubsetInstance::to_json() const {
  nlohmann::json preds = nlohmann::json::array();
  for (int64_t i = 0; i < residual_preds.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int64_t m = 0; m < residual_preds.cols(); ++m) row.push_back(residual_preds(i, m));
    preds.push_back(std::move(row));
  }
  return {{"target_residuals", target_residuals},
          {"residual_predictions", std::move(preds)},
          {"sizes", sizes},
          {"candidates", candidates},
          {"target", candidates[static_cast<size_t>(target_index)]}};
}

SubsetInstance SubsetInstance::from_json(const nlohmann::json& j) {
  SubsetInstance inst;
  inst.target_residuals = j.at("target_residuals").get<std::vector<double>>();
  inst.sizes = j.at("sizes").get<std::vector<double>>();
  inst.candidates = j.at("candidates").get<std::vector<std::string>>();
  const auto& preds = j.at("residual_predictions");
  inst.residual_preds =
      Matrix(static_cast<int64_t>(preds.size()), static_cast<int64_t>(inst.candidates.size()));
  for (size_t i = 0; i < preds.size(); ++i) {
    const auto& row = preds[i];
    require(row.size() == inst.candidates.size(), errc::parse,
            "subset: residual prediction row length mismatch");
    for (size_t m = 0; m < row.size(); ++m) {
      inst.residual_preds(static_cast<int64_t>(i), static_cast<int64_t>(m)) = row[m].get<double>();
    }
  }
  const std::string target = j.at("target").get<std::string>();
  auto it = std::find(inst.candidates.begin(), inst.candidates.end(), target);
  require(it != inst.candidates.end(), errc::parse, "subset: target not among candidates");
  inst.target_index = it - inst.candidates.begin();
  inst.validate();
  return inst;
}

namespace {

LearnerSpec with_salt(LearnerSpec spec, uint64_t salt) {
  spec.seed_salt = salt;
  return spec;
}

// Per-iteration working set shared by the stability and selection stages:
// an 80/20 split, a pooled base model on the 80% side, and the target's
// validation residuals.
struct IterationFit {
  Dataset d80;
  FittedModel base;
  Matrix x_valid;                  // target's validation rows
  std::vector<double> residuals;   // target's validation residuals vs the base
};

IterationFit fit_iteration(const Dataset& ds, const std::string& target,
                           const LearnerSpec& base_spec, uint64_t it_seed) {
  SplitPair split = stratified_split(ds, 0.8, rng::derive(it_seed, "split"));
  Dataset d80 = ds.subset(split.train_view);

  FittedModel base = fit(with_salt(base_spec, rng::derive(it_seed, "base")),
                         augmented_features(d80), d80.outcome());

  std::vector<uint8_t> in_train(static_cast<size_t>(ds.rows()), 0);
  for (int64_t i : split.train_view) in_train[static_cast<size_t>(i)] = 1;
  std::vector<int64_t> valid_rows;
  for (int64_t i : ds.rows_of(target)) {
    if (!in_train[static_cast<size_t>(i)]) valid_rows.push_back(i);
  }
  require(!valid_rows.empty(), errc::internal, "cluster: target has no validation rows");

  Matrix x_valid(static_cast<int64_t>(valid_rows.size()), ds.dim());
  std::vector<double> y_valid(valid_rows.size());
  for (size_t k = 0; k < valid_rows.size(); ++k) {
    for (int64_t j = 0; j < ds.dim(); ++j) x_valid(static_cast<int64_t>(k), j) = ds.features()(valid_rows[k], j);
    y_valid[k] = ds.outcome()[static_cast<size_t>(valid_rows[k])];
  }
  std::vector<double> base_pred =
      base_predict_at(base, x_valid, d80.source_pos(target), d80.source_count());
  std::vector<double> residuals(valid_rows.size());
  for (size_t k = 0; k < valid_rows.size(); ++k) residuals[k] = y_valid[k] - base_pred[k];

  return IterationFit{std::move(d80), std::move(base), std::move(x_valid), std::move(residuals)};
}

// Training rows and residual targets of one source inside the 80% split.
struct SourceResiduals {
  Matrix x;
  std::vector<double> target;
};

SourceResiduals source_residuals(const Dataset& d80, const FittedModel& base, const std::string& id) {
  const auto& rows = d80.rows_of(id);
  SourceResiduals out;
  out.x = Matrix(static_cast<int64_t>(rows.size()), d80.dim());
  out.target.resize(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    for (int64_t j = 0; j < d80.dim(); ++j) out.x(static_cast<int64_t>(k), j) = d80.features()(rows[k], j);
  }
  std::vector<double> pred = base_predict_at(base, out.x, d80.source_pos(id), d80.source_count());
  for (size_t k = 0; k < rows.size(); ++k) {
    out.target[k] = d80.outcome()[static_cast<size_t>(rows[k])] - pred[k];
  }
  return out;
}

}  // namespace

StabilityWeights stability_weights(const Dataset& ds, const std::string& target,
                                   const LearnerSpec& base_spec, const LearnerSpec& resid_spec,
                                   int64_t iters, int64_t candidate_count, uint64_t seed) {
  require(ds.has_source(target), errc::invalid_argument,
          "stability_weights: unknown target '" + target + "'");
  require(iters >= 1, errc::invalid_argument, "stability_weights: iters must be >= 1");
  require(candidate_count >= 1 && candidate_count <= ds.source_count(), errc::invalid_argument,
          "stability_weights: candidate_count must be in [1, source count]");
  require(candidate_count <= kMaxSubsetCandidates, errc::invalid_argument,
          "stability_weights: candidate_count exceeds the enumeration guard");

  std::vector<std::string> others;
  for (const auto& id : ds.source_ids()) {
    if (id != target) others.push_back(id);
  }

  struct IterationResult {
    std::vector<std::string> candidates;
    std::vector<uint8_t> z;
  };
  std::vector<IterationResult> results(static_cast<size_t>(iters));

  parallel::parallel_for(iters, [&](int64_t it) {
    const uint64_t it_seed = rng::derive(seed, "stability", target, static_cast<uint64_t>(it));

    rng::Engine cand_eng(rng::derive(it_seed, "cand"));
    std::vector<std::string> candidates{target};
    for (int64_t idx : cand_eng.sample_without_replacement(static_cast<int64_t>(others.size()),
                                                           candidate_count - 1)) {
      candidates.push_back(others[static_cast<size_t>(idx)]);
    }
    std::sort(candidates.begin(), candidates.end());

    IterationFit itfit = fit_iteration(ds, target, base_spec, it_seed);

    SubsetInstance inst;
    inst.target_residuals = itfit.residuals;
    inst.candidates = candidates;
    inst.target_index =
        std::find(candidates.begin(), candidates.end(), target) - candidates.begin();
    inst.sizes.resize(candidates.size());
    inst.residual_preds =
        Matrix(itfit.x_valid.rows(), static_cast<int64_t>(candidates.size()));
    for (size_t m = 0; m < candidates.size(); ++m) {
      SourceResiduals sr = source_residuals(itfit.d80, itfit.base, candidates[m]);
      inst.sizes[m] = static_cast<double>(sr.x.rows());
      FittedModel resid = fit(with_salt(resid_spec, rng::derive(it_seed, "resid", candidates[m])),
                              sr.x, sr.target);
      std::vector<double> pred = resid.predict(itfit.x_valid);
      for (int64_t i = 0; i < itfit.x_valid.rows(); ++i) {
        inst.residual_preds(i, static_cast<int64_t>(m)) = pred[static_cast<size_t>(i)];
      }
    }

    results[static_cast<size_t>(it)] = {std::move(candidates), solve_subset(inst).z};
  });

  StabilityWeights out;
  out.target = target;
  for (const auto& id : ds.source_ids()) out.counts[id] = {};
  for (const auto& r : results) {
    for (size_t m = 0; m < r.candidates.size(); ++m) {
      auto& c = out.counts[r.candidates[m]];
      c.candidate += 1;
      if (r.z[m]) c.selected += 1;
    }
  }
  for (const auto& id : ds.source_ids()) {
    const auto& c = out.counts[id];
    out.w[id] = c.candidate > 0
                    ? static_cast<double>(c.selected) / static_cast<double>(c.candidate)
                    : 0.0;
  }
  return out;
}

OneSeResult one_se_rule(std::span<const double> means, std::span<const double> ses) {
  require(!means.empty() && means.size() == ses.size(), errc::invalid_argument,
          "one_se_rule: means and ses must be nonempty and equal length");
  for (size_t k = 0; k < means.size(); ++k) {
    require(std::isfinite(means[k]) && std::isfinite(ses[k]) && ses[k] >= 0.0,
            errc::invalid_argument, "one_se_rule: inputs must be finite with nonnegative ses");
  }
  size_t k_min = 0;
  for (size_t k = 1; k < means.size(); ++k) {
    if (means[k] < means[k_min]) k_min = k;
  }
  const double cutoff = means[k_min] + ses[k_min];
  size_t k_star = k_min;
  for (size_t k = 0; k < means.size(); ++k) {
    if (means[k] <= cutoff) {
      k_star = k;
      break;
    }
  }
  return OneSeResult{static_cast<int64_t>(k_min) + 1, cutoff, static_cast<int64_t>(k_star) + 1};
}

ClusterReport select_cluster(const Dataset& ds, const std::string& target,
                             const StabilityWeights& weights, const LearnerSpec& base_spec,
                             const LearnerSpec& resid_spec, int64_t iters, int64_t k_max,
                             uint64_t seed) {
  require(ds.has_source(target), errc::invalid_argument,
          "select_cluster: unknown target '" + target + "'");
  require(iters >= 1, errc::invalid_argument, "select_cluster: iters must be >= 1");
  require(k_max >= 1, errc::invalid_argument, "select_cluster: k_max must be >= 1");
  for (const auto& id : ds.source_ids()) {
    require(weights.w.count(id) != 0, errc::invalid_argument,
            "select_cluster: stability weights missing source '" + id + "'");
  }

  // Ranking: descending weight, then higher selection count, then id; the
  // target is pinned to the front.
  std::vector<std::string> ranked;
  for (const auto& id : ds.source_ids()) {
    if (id != target) ranked.push_back(id);
  }
  auto selected_count = [&](const std::string& id) {
    auto it = weights.counts.find(id);
    return it == weights.counts.end() ? int64_t{0} : it->second.selected;
  };
  std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    const double wa = weights.w.at(a);
    const double wb = weights.w.at(b);
    if (wa != wb) return wa > wb;
    const int64_t sa = selected_count(a);
    const int64_t sb = selected_count(b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  ranked.insert(ranked.begin(), target);

  const int64_t k_used = std::min<int64_t>(k_max, ds.source_count());
  std::vector<std::vector<double>> per_iter(static_cast<size_t>(iters));

  parallel::parallel_for(iters, [&](int64_t it) {
    const uint64_t it_seed = rng::derive(seed, "select", target, static_cast<uint64_t>(it));
    IterationFit itfit = fit_iteration(ds, target, base_spec, it_seed);

    // Residual rows of each ranked member, computed once and pooled per k.
    std::vector<SourceResiduals> member(static_cast<size_t>(k_used));
    int64_t total_rows = 0;
    for (int64_t k = 0; k < k_used; ++k) {
      member[static_cast<size_t>(k)] =
          source_residuals(itfit.d80, itfit.base, ranked[static_cast<size_t>(k)]);
      total_rows += member[static_cast<size_t>(k)].x.rows();
    }

    std::vector<double> mse(static_cast<size_t>(k_used));
    Matrix pool_x(total_rows, ds.dim());
    std::vector<double> pool_y(static_cast<size_t>(total_rows));
    int64_t filled = 0;
    for (int64_t k = 0; k < k_used; ++k) {
      const auto& sr = member[static_cast<size_t>(k)];
      for (int64_t i = 0; i < sr.x.rows(); ++i, ++filled) {
        for (int64_t j = 0; j < ds.dim(); ++j) pool_x(filled, j) = sr.x(i, j);
        pool_y[static_cast<size_t>(filled)] = sr.target[static_cast<size_t>(i)];
      }
      // view of the first `filled` pooled rows
      Matrix x_k(filled, ds.dim());
      for (int64_t i = 0; i < filled; ++i) {
        for (int64_t j = 0; j < ds.dim(); ++j) x_k(i, j) = pool_x(i, j);
      }
      std::vector<double> y_k(pool_y.begin(), pool_y.begin() + filled);
      FittedModel resid = fit(
          with_salt(resid_spec, rng::derive(it_seed, "resid", static_cast<uint64_t>(k + 1))), x_k,
          y_k);
      std::vector<double> pred = resid.predict(itfit.x_valid);
      double total = 0.0;
      for (size_t i = 0; i < pred.size(); ++i) {
        const double diff = itfit.residuals[i] - pred[i];
        total += diff * diff;
      }
      mse[static_cast<size_t>(k)] = total / static_cast<double>(pred.size());
    }
    per_iter[static_cast<size_t>(it)] = std::move(mse);
  });

  ClusterReport report;
  report.target = target;
  report.ranked = ranked;
  report.mse_mean.assign(static_cast<size_t>(k_used), 0.0);
  report.mse_se.assign(static_cast<size_t>(k_used), 0.0);
  for (const auto& row : per_iter) {
    for (int64_t k = 0; k < k_used; ++k) report.mse_mean[static_cast<size_t>(k)] += row[static_cast<size_t>(k)];
  }
  for (auto& v : report.mse_mean) v /= static_cast<double>(iters);
  if (iters > 1) {
    for (const auto& row : per_iter) {
      for (int64_t k = 0; k < k_used; ++k) {
        const double diff = row[static_cast<size_t>(k)] - report.mse_mean[static_cast<size_t>(k)];
        report.mse_se[static_cast<size_t>(k)] += diff * diff;
      }
    }
    for (auto& v : report.mse_se) {
      v = std::sqrt(v / static_cast<double>(iters - 1)) / std::sqrt(static_cast<double>(iters));
    }
  }

  const OneSeResult rule = one_se_rule(report.mse_mean, report.mse_se);
  report.k_min = rule.k_min;
  report.cutoff = rule.cutoff;
  report.k_star = rule.k_star;
  report.cluster.assign(ranked.begin(), ranked.begin() + rule.k_star);
  return report;
}

nlohmann::json StabilityWeights::to_json() const {
  nlohmann::json counts_json;
  for (const auto& [id, c] : counts) {
    counts_json[id] = {{"selected", c.selected}, {"candidate", c.candidate}};
  }
  return {{"target", target}, {"weights", w}, {"counts", std::move(counts_json)}};
}

StabilityWeights StabilityWeights::from_json(const nlohmann::json& j) {
  StabilityWeights out;
  out.target = j.at("target").get<std::string>();
  for (const auto& [id, v] : j.at("weights").items()) out.w[id] = v.get<double>();
  if (j.contains("counts")) {
    for (const auto& [id, c] : j.at("counts").items()) {
      out.counts[id] = {c.at("selected").get<int64_t>(), c.at("candidate").get<int64_t>()};
    }
  }
  return out;
}

nlohmann::json ClusterReport::to_json() const {
  return {{"target", target},   {"ranked", ranked}, {"mse_mean", mse_mean},
          {"mse_se", mse_se},   {"k_min", k_min},   {"cutoff", cutoff},
          {"k_star", k_star},   {"cluster", cluster}};
}

ClusterReport ClusterReport::from_json(const nlohmann::json& j) {
  ClusterReport out;
  out.target = j.at("target").get<std::string>();
  out.ranked = j.at("ranked").get<std::vector<std::string>>();
  out.mse_mean = j.at("mse_mean").get<std::vector<double>>();
  out.mse_se = j.at("mse_se").get<std::vector<double>>();
  out.k_min = j.at("k_min").get<int64_t>();
  out.cutoff = j.at("cutoff").get<double>();
  out.k_star = j.at("k_star").get<int64_t>();
  out.cluster = j.at("cluster").get<std::vector<std::string>>();
  return out;
}

std::vector<std::vector<std::string>> ClusterReport::curve_rows() const {
  std::vector<std::vector<std::string>> rows;
  for (size_t k = 0; k < mse_mean.size(); ++k) {
    rows.push_back({format_int(static_cast<int64_t>(k) + 1), format_double(mse_mean[k]),
                    format_double(mse_se[k])});
  }
  return rows;
}

}  // namespace ctrl
