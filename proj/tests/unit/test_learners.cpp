#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/learners.hpp"
#include "helpers.hpp"

using namespace ctrl;
using testutil::matrix_of;

namespace {

LearnerSpec ridge_spec(double penalty = 1e-6) {
  LearnerSpec s;
  s.kind = LearnerKind::ridge;
  s.ridge_penalty = penalty;
  return s;
}

LearnerSpec tree_spec(int64_t max_depth, int64_t min_leaf = 1) {
  LearnerSpec s;
  s.kind = LearnerKind::tree;
  s.max_depth = max_depth;
  s.min_leaf = min_leaf;
  return s;
}

Matrix random_matrix(int64_t n, int64_t d, uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Matrix X(n, d);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) X(i, j) = normal(gen);
  }
  return X;
}

double weighted_sse(const FittedModel& model, const Matrix& X, const std::vector<double>& y) {
  std::vector<double> pred = model.predict(X);
  double total = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double diff = y[i] - pred[i];
    total += diff * diff;
  }
  return total;
}

}  // namespace

TEST_CASE("ridge with zero penalty fits collinear points exactly") {
  Matrix X = matrix_of({{0.0}, {1.0}, {2.0}});
  std::vector<double> y{1.0, 3.0, 5.0};
  FittedModel m = fit(ridge_spec(0.0), X, y);
  CHECK(m.linear().coef[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.linear().intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.predict_row(std::vector<double>{3.0}) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("ridge with a zero weight matches dropping the row") {
  Matrix X3 = matrix_of({{0.0}, {1.0}, {9.0}});
  std::vector<double> y3{1.0, 3.0, -50.0};
  std::vector<double> w3{1.0, 1.0, 0.0};
  FittedModel weighted = fit(ridge_spec(0.0), X3, y3, w3);

  Matrix X2 = matrix_of({{0.0}, {1.0}});
  std::vector<double> y2{1.0, 3.0};
  FittedModel dropped = fit(ridge_spec(0.0), X2, y2);

  CHECK(weighted.linear().coef[0] ==
        doctest::Approx(dropped.linear().coef[0]).epsilon(1e-12));
  CHECK(weighted.linear().intercept ==
        doctest::Approx(dropped.linear().intercept).epsilon(1e-12));
}

TEST_CASE("ridge residuals are orthogonal to the design at zero penalty") {
  const int64_t n = 60, d = 5;
  Matrix X = random_matrix(n, d, 31);
  std::mt19937_64 gen(77);
  std::normal_distribution<double> normal;
  std::vector<double> y(static_cast<size_t>(n));
  for (auto& v : y) v = normal(gen);

  FittedModel m = fit(ridge_spec(0.0), X, y);
  std::vector<double> pred = m.predict(X);
  double y_norm = 0.0;
  for (double v : y) y_norm += v * v;
  for (int64_t j = -1; j < d; ++j) {  // -1 is the intercept column
    double dot = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double col = j < 0 ? 1.0 : X(i, j);
      dot += col * (y[size_t(i)] - pred[size_t(i)]);
    }
    CHECK(std::abs(dot) <= 1e-8 * std::sqrt(y_norm * double(n)));
  }
}

TEST_CASE("ridge rejects a singular design only when unpenalized") {
  // duplicate columns
  Matrix X = matrix_of({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}});
  std::vector<double> y{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(fit(ridge_spec(0.0), X, y), error);
  CHECK_NOTHROW(fit(ridge_spec(1e-6), X, y));
}

TEST_CASE("depth-1 tree splits perfectly separable data at the midpoint") {
  Matrix X = matrix_of({{0.0}, {0.0}, {10.0}, {10.0}});
  std::vector<double> y{0.0, 0.0, 1.0, 1.0};
  FittedModel m = fit(tree_spec(1), X, y);
  REQUIRE(m.tree().nodes.size() == 3);
  CHECK(m.tree().nodes[0].feature == 0);
  CHECK(m.tree().nodes[0].threshold == doctest::Approx(5.0));
  CHECK(m.predict_row(std::vector<double>{-3.0}) == 0.0);
  CHECK(m.predict_row(std::vector<double>{7.0}) == 1.0);
}

TEST_CASE("depth-0 tree predicts the global mean everywhere") {
  Matrix X = matrix_of({{0.0}, {1.0}, {2.0}, {3.0}});
  std::vector<double> y{1.0, 2.0, 3.0, 6.0};
  FittedModel m = fit(tree_spec(0), X, y);
  CHECK(m.predict_row(std::vector<double>{-100.0}) == doctest::Approx(3.0));
  CHECK(m.predict_row(std::vector<double>{100.0}) == doctest::Approx(3.0));
}

TEST_CASE("tree with min_leaf = n is the global mean") {
  Matrix X = random_matrix(20, 3, 5);
  std::vector<double> y(20);
  std::iota(y.begin(), y.end(), 0.0);
  FittedModel m = fit(tree_spec(8, 20), X, y);
  CHECK(m.tree().nodes.size() == 1);
  CHECK(m.predict_row(std::vector<double>{0.0, 0.0, 0.0}) == doctest::Approx(9.5));
}

TEST_CASE("tree training loss is non-increasing in max_depth") {
  Matrix X = random_matrix(120, 4, 11);
  std::mt19937_64 gen(13);
  std::normal_distribution<double> normal;
  std::vector<double> y(120);
  for (size_t i = 0; i < y.size(); ++i) {
    y[i] = std::sin(X(int64_t(i), 0)) + 0.5 * X(int64_t(i), 1) + 0.2 * normal(gen);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int64_t depth = 0; depth <= 6; ++depth) {
    const double sse = weighted_sse(fit(tree_spec(depth, 2), X, y), X, y);
    CHECK(sse <= prev + 1e-9);
    prev = sse;
  }
}

TEST_CASE("tree ties break toward the lower feature index") {
  // identical columns produce identical gains; the first feature must win
  Matrix X = matrix_of({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}});
  std::vector<double> y{0.0, 0.0, 1.0, 1.0};
  FittedModel m = fit(tree_spec(1), X, y);
  CHECK(m.tree().nodes[0].feature == 0);
}

TEST_CASE("fits are invariant to row permutation") {
  const int64_t n = 40;
  Matrix X = random_matrix(n, 3, 21);
  std::mt19937_64 gen(22);
  std::normal_distribution<double> normal;
  std::vector<double> y(static_cast<size_t>(n));
  for (auto& v : y) v = normal(gen);

  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Matrix Xp(n, 3);
  std::vector<double> yp(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < 3; ++j) Xp(i, j) = X(perm[size_t(i)], j);
    yp[size_t(i)] = y[size_t(perm[size_t(i)])];
  }

  for (LearnerSpec spec : {ridge_spec(), tree_spec(4, 2), [] {
         LearnerSpec f;
         f.kind = LearnerKind::forest;
         f.n_trees = 8;
         f.max_depth = 3;
         f.min_leaf = 2;
         f.seed_salt = 99;
         return f;
       }()}) {
    FittedModel a = fit(spec, X, y);
    FittedModel b = fit(spec, Xp, yp);
    CHECK(a == b);
  }
}

TEST_CASE("forest of identical trees equals one tree") {
  // constant outcomes make every bootstrap tree the same single leaf
  Matrix X = matrix_of({{1.0}, {2.0}, {3.0}, {4.0}});
  std::vector<double> y{2.5, 2.5, 2.5, 2.5};
  LearnerSpec forest;
  forest.kind = LearnerKind::forest;
  forest.n_trees = 4;
  forest.max_depth = 3;
  forest.min_leaf = 1;
  FittedModel f = fit(forest, X, y);
  FittedModel t = fit(tree_spec(3), X, y);
  CHECK(f.predict_row(std::vector<double>{9.0}) == t.predict_row(std::vector<double>{9.0}));
  CHECK(f.predict_row(std::vector<double>{9.0}) == 2.5);
}

TEST_CASE("forest prediction variance shrinks with more trees") {
  Matrix X = random_matrix(80, 3, 3);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  std::vector<double> y(80);
  for (size_t i = 0; i < y.size(); ++i) y[i] = X(int64_t(i), 0) + 0.3 * normal(gen);
  const std::vector<double> probe{0.4, -0.2, 0.1};

  auto variance_over_seeds = [&](int64_t n_trees) {
    std::vector<double> preds;
    for (uint64_t salt = 1; salt <= 30; ++salt) {
      LearnerSpec spec;
      spec.kind = LearnerKind::forest;
      spec.n_trees = n_trees;
      spec.max_depth = 4;
      spec.min_leaf = 2;
      spec.seed_salt = salt;
      preds.push_back(fit(spec, X, y).predict_row(probe));
    }
    const double mean = std::accumulate(preds.begin(), preds.end(), 0.0) / preds.size();
    double var = 0.0;
    for (double p : preds) var += (p - mean) * (p - mean);
    return var / (preds.size() - 1);
  };
  CHECK(variance_over_seeds(64) < variance_over_seeds(1));
}

TEST_CASE("forest fits are independent of the worker count") {
  Matrix X = random_matrix(60, 3, 19);
  std::mt19937_64 gen(20);
  std::normal_distribution<double> normal;
  std::vector<double> y(60);
  for (auto& v : y) v = normal(gen);
  LearnerSpec spec;
  spec.kind = LearnerKind::forest;
  spec.n_trees = 16;
  spec.max_depth = 4;
  spec.min_leaf = 2;
  spec.seed_salt = 77;

  ctrl::parallel::set_workers(1);
  FittedModel a = fit(spec, X, y);
  ctrl::parallel::set_workers(3);
  FittedModel b = fit(spec, X, y);
  ctrl::parallel::set_workers(0);
  CHECK(a == b);
}

TEST_CASE("fixed partition means") {
  LeafPartition part;
  const double inf = std::numeric_limits<double>::infinity();
  part.boxes.push_back(Box{{{-inf, 0.0}}});
  part.boxes.push_back(Box{{{0.0, inf}}});

  SUBCASE("direct averaging per leaf") {
    Matrix X = matrix_of({{-1.0}, {-2.0}, {3.0}});
    std::vector<double> y{-1.0, -1.0, 2.0};
    FittedModel m = fit_fixed_partition_mean(part, X, y);
    CHECK(m.predict_row(std::vector<double>{-5.0}) == doctest::Approx(-1.0));
    CHECK(m.predict_row(std::vector<double>{5.0}) == doctest::Approx(2.0));
  }

  SUBCASE("empty leaves fall back to the global weighted mean") {
    Matrix X = matrix_of({{-1.0}, {-2.0}});
    std::vector<double> y{1.0, 3.0};
    FittedModel m = fit_fixed_partition_mean(part, X, y);
    CHECK(m.predict_row(std::vector<double>{5.0}) == doctest::Approx(2.0));
  }

  SUBCASE("weighted means") {
    Matrix X = matrix_of({{-1.0}, {-2.0}});
    std::vector<double> y{0.0, 3.0};
    std::vector<double> w{2.0, 1.0};
    FittedModel m = fit_fixed_partition_mean(part, X, y, w);
    CHECK(m.predict_row(std::vector<double>{-1.0}) == doctest::Approx(1.0));
  }

  SUBCASE("rows outside every box are rejected") {
    LeafPartition narrow;
    narrow.boxes.push_back(Box{{{0.0, 1.0}}});
    Matrix X = matrix_of({{2.0}});
    std::vector<double> y{0.0};
    CHECK_THROWS_AS(fit_fixed_partition_mean(narrow, X, y), error);
  }
}

TEST_CASE("fit rejects invalid inputs") {
  Matrix X = matrix_of({{1.0}, {2.0}});
  std::vector<double> y{0.0, 1.0};
  CHECK_THROWS_AS(fit(ridge_spec(), X, std::vector<double>{0.0}), error);          // length mismatch
  CHECK_THROWS_AS(fit(ridge_spec(), X, y, std::vector<double>{0.0, 0.0}), error);  // all-zero weights
  CHECK_THROWS_AS(fit(ridge_spec(), X, std::vector<double>{0.0, std::nan("")}), error);
  CHECK_THROWS_AS(fit(tree_spec(-1), X, y), error);

  FittedModel m = fit(ridge_spec(), X, y);
  CHECK_THROWS_AS(m.predict_row(std::vector<double>{1.0, 2.0}), error);  // dimension mismatch
}

TEST_CASE("weight scale invariance") {
  Matrix X = random_matrix(30, 2, 8);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  std::vector<double> y(30);
  std::vector<double> w(30);
  for (size_t i = 0; i < y.size(); ++i) {
    y[i] = normal(gen);
    w[i] = 0.5 + std::abs(normal(gen));
  }
  std::vector<double> w3 = w;
  for (auto& v : w3) v *= 3.0;

  for (LearnerSpec spec : {ridge_spec(), tree_spec(3, 2)}) {
    FittedModel a = fit(spec, X, y, w);
    FittedModel b = fit(spec, X, y, w3);
    std::vector<double> pa = a.predict(X);
    std::vector<double> pb = b.predict(X);
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
  }
}

TEST_CASE("models serialize to versioned JSON and back") {
  Matrix X = random_matrix(25, 3, 14);
  std::mt19937_64 gen(15);
  std::normal_distribution<double> normal;
  std::vector<double> y(25);
  for (auto& v : y) v = normal(gen);

  LearnerSpec forest;
  forest.kind = LearnerKind::forest;
  forest.n_trees = 5;
  forest.max_depth = 3;
  forest.min_leaf = 2;
  forest.seed_salt = 4;

  for (LearnerSpec spec : {ridge_spec(), tree_spec(3, 2), forest}) {
    FittedModel m = fit(spec, X, y);
    FittedModel restored = FittedModel::from_json(m.to_json());
    CHECK(m == restored);
  }

  FittedModel m = fit(ridge_spec(), X, y);
  nlohmann::json j = m.to_json();
  j["format_version"] = 999;
  CHECK_THROWS_AS(FittedModel::from_json(j), error);
}
