#include "doctest.h"

#include <algorithm>
#include <random>

#include "core/cluster.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"
#include "helpers.hpp"

using namespace ctrl;
using testutil::make_dataset;
using testutil::matrix_of;

namespace {

SubsetInstance two_candidate_instance() {
  // target g = "g", other candidate "m"
  SubsetInstance inst;
  inst.target_residuals = {1.0, -1.0};
  inst.candidates = {"g", "m"};
  inst.target_index = 0;
  inst.sizes = {10.0, 10.0};
  inst.residual_preds = matrix_of({{0.9, 0.0}, {-0.9, 0.0}});
  return inst;
}

SubsetInstance random_instance(std::mt19937_64& gen, int64_t max_candidates = 7) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int64_t> cand_dist(1, max_candidates);
  std::uniform_int_distribution<int64_t> rows_dist(1, 30);
  std::uniform_real_distribution<double> size_dist(1.0, 500.0);

  SubsetInstance inst;
  const int64_t c = cand_dist(gen);
  const int64_t v = rows_dist(gen);
  for (int64_t m = 0; m < c; ++m) {
    inst.candidates.push_back("s" + std::to_string(m));
    inst.sizes.push_back(size_dist(gen));
  }
  inst.target_index = std::uniform_int_distribution<int64_t>(0, c - 1)(gen);
  inst.residual_preds = Matrix(v, c);
  for (int64_t i = 0; i < v; ++i) {
    inst.target_residuals.push_back(normal(gen));
    for (int64_t m = 0; m < c; ++m) inst.residual_preds(i, m) = normal(gen);
  }
  return inst;
}

LearnerSpec ridge_spec(uint64_t seed = 0) {
  LearnerSpec s;
  s.kind = LearnerKind::ridge;
  s.seed_salt = seed;
  return s;
}

// planted pair: g and s share the outcome weights; others are independent
Dataset planted_pair_dataset(uint64_t seed, int n_others = 6, int rows_each = 80, int dim = 6) {
  ctrl::rng::Engine eng(seed);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<std::string> src;

  auto draw_weights = [&] {
    std::vector<double> w(dim);
    for (auto& v : w) v = eng.normal();
    return w;
  };
  std::vector<double> shared = draw_weights();
  auto add_source = [&](const std::string& id, const std::vector<double>& w) {
    for (int i = 0; i < rows_each; ++i) {
      std::vector<double> xi(dim);
      double dot = 0.0;
      for (int j = 0; j < dim; ++j) {
        xi[j] = eng.normal();
        dot += w[j] * xi[j];
      }
      x.push_back(xi);
      y.push_back(dot + 0.3 * eng.normal());
      src.push_back(id);
    }
  };
  add_source("g0", shared);
  add_source("g1", shared);
  for (int k = 0; k < n_others; ++k) add_source("o" + std::to_string(k), draw_weights());
  return make_dataset(x, y, src);
}

}  // namespace

TEST_CASE("subset_objective matches hand-computed values") {
  SubsetInstance inst = two_candidate_instance();

  // singleton reduces to plain squared error
  CHECK(subset_objective(inst, {1, 0}) == doctest::Approx(0.02).epsilon(1e-12));
  // size-weighted average: predictions [0.45, -0.45]
  CHECK(subset_objective(inst, {1, 1}) == doctest::Approx(0.605).epsilon(1e-12));

  // equal residual predictions make the objective independent of z_m
  SubsetInstance equal = inst;
  equal.residual_preds = matrix_of({{0.9, 0.9}, {-0.9, -0.9}});
  CHECK(subset_objective(equal, {1, 0}) == doctest::Approx(subset_objective(equal, {1, 1})));
}

TEST_CASE("subset_objective enforces the target constraint") {
  SubsetInstance inst = two_candidate_instance();
  CHECK_THROWS_AS(subset_objective(inst, {0, 1}), error);
  CHECK_THROWS_AS(subset_objective(inst, {0, 0}), error);
  CHECK_THROWS_AS(subset_objective(inst, {1}), error);
}

TEST_CASE("solve_subset enumerates to the optimum") {
  SUBCASE("keeps the singleton when pooling hurts") {
    SubsetSolution s = solve_subset(two_candidate_instance());
    CHECK(s.z == std::vector<uint8_t>{1, 0});
    CHECK(s.objective == doctest::Approx(0.02).epsilon(1e-12));
  }
  SUBCASE("pools when averaging cancels the error") {
    SubsetInstance inst = two_candidate_instance();
    inst.residual_preds = matrix_of({{2.0, 0.0}, {-2.0, 0.0}});
    SubsetSolution s = solve_subset(inst);
    CHECK(s.z == std::vector<uint8_t>{1, 1});
    CHECK(s.objective == doctest::Approx(0.0));
  }
  SUBCASE("single candidate is forced") {
    SubsetInstance inst = two_candidate_instance();
    inst.candidates = {"g"};
    inst.sizes = {5.0};
    inst.target_index = 0;
    inst.residual_preds = matrix_of({{0.9}, {-0.9}});
    SubsetSolution s = solve_subset(inst);
    CHECK(s.z == std::vector<uint8_t>{1});
  }
}

TEST_CASE("solve_subset tie rule prefers small then lexicographic") {
  // all three candidates produce the same predictions, so every subset ties
  SubsetInstance inst;
  inst.candidates = {"a", "b", "c"};
  inst.target_index = 0;
  inst.sizes = {10.0, 10.0, 10.0};
  inst.target_residuals = {1.0, -1.0};
  inst.residual_preds = matrix_of({{0.5, 0.5, 0.5}, {-0.5, -0.5, -0.5}});
  SubsetSolution s = solve_subset(inst);
  CHECK(s.z == std::vector<uint8_t>{1, 0, 0});  // smallest cardinality

  // {a,b} and {a,c} tie at zero; {a} and {a,b,c} are strictly worse
  inst.residual_preds = matrix_of({{0.0, 2.0, 2.0}, {0.0, -2.0, -2.0}});
  s = solve_subset(inst);
  CHECK(s.z == std::vector<uint8_t>{1, 1, 0});  // lexicographically smallest id set
}

TEST_CASE("solve_subset never exceeds any admissible objective") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    SubsetInstance inst = random_instance(gen);
    SubsetSolution best = solve_subset(inst);
    const int64_t c = static_cast<int64_t>(inst.candidates.size());
    for (uint64_t mask = 0; mask < (uint64_t{1} << c); ++mask) {
      std::vector<uint8_t> z(static_cast<size_t>(c), 0);
      for (int64_t m = 0; m < c; ++m) z[static_cast<size_t>(m)] = (mask >> m) & 1;
      if (!z[static_cast<size_t>(inst.target_index)]) continue;
      CHECK(best.objective <= subset_objective(inst, z));
    }
  }
}

TEST_CASE("subset objective and solution are invariant to size rescaling") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    SubsetInstance inst = random_instance(gen);
    SubsetSolution base = solve_subset(inst);

    SubsetInstance pow2 = inst;
    for (auto& n : pow2.sizes) n *= 4.0;
    SubsetSolution scaled = solve_subset(pow2);
    CHECK(scaled.z == base.z);
    CHECK(scaled.objective == base.objective);  // power-of-two scaling is exact

    SubsetInstance odd = inst;
    for (auto& n : odd.sizes) n *= 3.0;
    SubsetSolution odd_s = solve_subset(odd);
    CHECK(odd_s.z == base.z);
    CHECK(odd_s.objective == doctest::Approx(base.objective).epsilon(1e-12));
  }
}

TEST_CASE("solve_subset enforces the enumeration guard") {
  SubsetInstance inst;
  for (int m = 0; m < 21; ++m) {
    inst.candidates.push_back("s" + std::to_string(m));
    inst.sizes.push_back(1.0);
  }
  inst.target_index = 0;
  inst.target_residuals = {0.0};
  inst.residual_preds = Matrix(1, 21);
  CHECK_THROWS_AS(solve_subset(inst), error);
}

TEST_CASE("one_se_rule matches hand-computed selections") {
  auto run = [](std::vector<double> means, std::vector<double> ses) {
    return one_se_rule(means, ses);
  };
  OneSeResult r = run({0.50, 0.30, 0.29}, {0.02, 0.02, 0.02});
  CHECK(r.k_min == 3);
  CHECK(r.cutoff == doctest::Approx(0.31));
  CHECK(r.k_star == 2);

  r = run({0.30, 0.40}, {0.01, 0.01});
  CHECK(r.k_star == 1);

  // zero SEs select the smallest k attaining the exact minimum
  r = run({0.5, 0.2, 0.2, 0.4}, {0.0, 0.0, 0.0, 0.0});
  CHECK(r.k_min == 2);
  CHECK(r.k_star == 2);

  CHECK_THROWS_AS(run({}, {}), error);
  CHECK_THROWS_AS(run({0.1}, {-0.1}), error);
}

TEST_CASE("one_se_rule internal consistency on random curves") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + int(gen() % 10);
    std::vector<double> means, ses;
    for (int i = 0; i < k; ++i) {
      means.push_back(unif(gen));
      ses.push_back(0.1 * unif(gen));
    }
    OneSeResult r = one_se_rule(means, ses);
    CHECK(r.cutoff == means[size_t(r.k_min - 1)] + ses[size_t(r.k_min - 1)]);
    CHECK(means[size_t(r.k_star - 1)] <= r.cutoff);
    for (int64_t j = 1; j < r.k_star; ++j) CHECK(means[size_t(j - 1)] > r.cutoff);
    CHECK(r.k_star <= r.k_min);
  }
}

TEST_CASE("stability_weights basic contracts") {
  Dataset ds = planted_pair_dataset(3, 4, 24, 4);
  StabilityWeights w =
      stability_weights(ds, "g0", ridge_spec(1), ridge_spec(1), 12, 4, 99);
  CHECK(w.target == "g0");
  CHECK(w.w.at("g0") == 1.0);
  int64_t candidate_total = 0;
  for (const auto& [id, c] : w.counts) {
    CHECK(c.selected <= c.candidate);
    CHECK(w.w.at(id) >= 0.0);
    CHECK(w.w.at(id) <= 1.0);
    candidate_total += c.candidate;
  }
  CHECK(candidate_total == 12 * 4);
  CHECK(w.counts.at("g0").candidate == 12);
  CHECK(w.counts.at("g0").selected == 12);

  StabilityWeights again =
      stability_weights(ds, "g0", ridge_spec(1), ridge_spec(1), 12, 4, 99);
  CHECK(w.w == again.w);

  CHECK_THROWS_AS(stability_weights(ds, "nope", ridge_spec(), ridge_spec(), 4, 3, 1), error);
  CHECK_THROWS_AS(stability_weights(ds, "g0", ridge_spec(), ridge_spec(), 4, 99, 1), error);
}

TEST_CASE("stability_weights is independent of the worker count") {
  Dataset ds = planted_pair_dataset(11, 4, 24, 4);
  parallel::set_workers(1);
  StabilityWeights w1 = stability_weights(ds, "g1", ridge_spec(2), ridge_spec(2), 10, 4, 7);
  parallel::set_workers(4);
  StabilityWeights w4 = stability_weights(ds, "g1", ridge_spec(2), ridge_spec(2), 10, 4, 7);
  parallel::set_workers(0);
  CHECK(w1.w == w4.w);
  for (const auto& [id, c] : w1.counts) {
    CHECK(c.selected == w4.counts.at(id).selected);
    CHECK(c.candidate == w4.counts.at(id).candidate);
  }
}

TEST_CASE("stability_weights ranks the planted sibling above unrelated sources") {
  int wins = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Dataset ds = planted_pair_dataset(seed);
    StabilityWeights w =
        stability_weights(ds, "g0", ridge_spec(seed), ridge_spec(seed), 40, 5, seed * 101);
    std::vector<double> other_w;
    for (const auto& [id, value] : w.w) {
      if (id != "g0" && id != "g1") other_w.push_back(value);
    }
    std::sort(other_w.begin(), other_w.end());
    const double median = other_w[other_w.size() / 2];
    wins += w.w.at("g1") > median;
  }
  CHECK(wins >= 8);
}

TEST_CASE("select_cluster contracts and determinism") {
  Dataset ds = planted_pair_dataset(21, 4, 30, 4);
  StabilityWeights w = stability_weights(ds, "g0", ridge_spec(3), ridge_spec(3), 10, 4, 13);

  SUBCASE("k_max = 1 forces the singleton cluster") {
    ClusterReport r = select_cluster(ds, "g0", w, ridge_spec(3), ridge_spec(3), 8, 1, 13);
    CHECK(r.cluster == std::vector<std::string>{"g0"});
    CHECK(r.k_star == 1);
    CHECK(r.mse_mean.size() == 1);
  }

  SUBCASE("report is internally consistent") {
    ClusterReport r = select_cluster(ds, "g0", w, ridge_spec(3), ridge_spec(3), 8, 4, 13);
    CHECK(r.ranked.front() == "g0");
    CHECK(r.ranked.size() == size_t(ds.source_count()));
    CHECK(r.mse_mean.size() == 4);  // min(k_max, |M|)
    CHECK(r.cutoff == doctest::Approx(r.mse_mean[size_t(r.k_min - 1)] +
                                      r.mse_se[size_t(r.k_min - 1)]));
    CHECK(std::vector<std::string>(r.ranked.begin(), r.ranked.begin() + r.k_star) == r.cluster);

    ClusterReport again = select_cluster(ds, "g0", w, ridge_spec(3), ridge_spec(3), 8, 4, 13);
    CHECK(r.mse_mean == again.mse_mean);
    CHECK(r.cluster == again.cluster);

    parallel::set_workers(3);
    ClusterReport threaded = select_cluster(ds, "g0", w, ridge_spec(3), ridge_spec(3), 8, 4, 13);
    parallel::set_workers(0);
    CHECK(r.mse_mean == threaded.mse_mean);
    CHECK(r.mse_se == threaded.mse_se);
  }
}

TEST_CASE("cluster reports and stability weights serialize") {
  Dataset ds = planted_pair_dataset(31, 3, 20, 3);
  StabilityWeights w = stability_weights(ds, "g1", ridge_spec(4), ridge_spec(4), 6, 3, 5);
  StabilityWeights w2 = StabilityWeights::from_json(w.to_json());
  CHECK(w.w == w2.w);
  CHECK(w.target == w2.target);

  ClusterReport r = select_cluster(ds, "g1", w, ridge_spec(4), ridge_spec(4), 6, 3, 5);
  ClusterReport r2 = ClusterReport::from_json(r.to_json());
  CHECK(r.ranked == r2.ranked);
  CHECK(r.mse_mean == r2.mse_mean);
  CHECK(r.k_star == r2.k_star);
  CHECK(r.cluster == r2.cluster);
  CHECK(r.curve_rows().size() == r.mse_mean.size());
}

TEST_CASE("subset instances serialize") {
  SubsetInstance inst = two_candidate_instance();
  SubsetInstance restored = SubsetInstance::from_json(inst.to_json());
  CHECK(restored.candidates == inst.candidates);
  CHECK(restored.target_index == inst.target_index);
  CHECK(restored.sizes == inst.sizes);
  CHECK(subset_objective(restored, {1, 1}) == subset_objective(inst, {1, 1}));
}
