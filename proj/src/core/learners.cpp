#include "learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "rng.hpp"

namespace ctrl {

namespace {

constexpr int64_t kModelFormatVersion = 1;

// Lexicographic order over (feature row, y, w); fits reorder rows through this
// so they are invariant to input row permutation.
std::vector<int64_t> canonical_row_order(const Matrix& X, std::span<const double> y,
                                         std::span<const double> w) {
  std::vector<int64_t> order(static_cast<size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    auto ra = X.row(a);
    auto rb = X.row(b);
    for (size_t j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    if (y[static_cast<size_t>(a)] != y[static_cast<size_t>(b)]) {
      return y[static_cast<size_t>(a)] < y[static_cast<size_t>(b)];
    }
    return w[static_cast<size_t>(a)] < w[static_cast<size_t>(b)];
  });
  return order;
}

struct FitData {
  Matrix X;
  std::vector<double> y;
  std::vector<double> w;
};

// Validates inputs, fills in unit weights, normalizes weights to mean one and
// canonicalizes row order.
FitData prepare(const Matrix& X, std::span<const double> y, std::span<const double> weights) {
  const int64_t n = X.rows();
  require(n >= 1, errc::invalid_argument, "fit: needs at least one row");
  require(X.cols() >= 1, errc::invalid_argument, "fit: needs at least one feature");
  require(static_cast<int64_t>(y.size()) == n, errc::invalid_argument,
          "fit: outcome length does not match row count");
  require(weights.empty() || static_cast<int64_t>(weights.size()) == n, errc::invalid_argument,
          "fit: weight length does not match row count");

  std::vector<double> w(static_cast<size_t>(n), 1.0);
  double w_sum = static_cast<double>(n);
  if (!weights.empty()) {
    w_sum = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      require(std::isfinite(weights[i]) && weights[i] >= 0.0, errc::invalid_argument,
              "fit: weights must be finite and nonnegative");
      w[i] = weights[i];
      w_sum += weights[i];
    }
    require(w_sum > 0.0, errc::invalid_argument, "fit: weights must not all be zero");
  }
  for (size_t i = 0; i < y.size(); ++i) {
    require(std::isfinite(y[i]), errc::invalid_argument, "fit: non-finite outcome");
  }
  for (int64_t i = 0; i < n; ++i) {
    for (double v : X.row(i)) {
      require(std::isfinite(v), errc::invalid_argument, "fit: non-finite feature");
    }
  }

  const double factor = static_cast<double>(n) / w_sum;
  for (auto& v : w) v *= factor;

  std::vector<int64_t> order = canonical_row_order(X, y, w);
  FitData out;
  out.X = Matrix(n, X.cols());
  out.y.resize(static_cast<size_t>(n));
  out.w.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int64_t src = order[static_cast<size_t>(i)];
    for (int64_t j = 0; j < X.cols(); ++j) out.X(i, j) = X(src, j);
    out.y[static_cast<size_t>(i)] = y[static_cast<size_t>(src)];
    out.w[static_cast<size_t>(i)] = w[static_cast<size_t>(src)];
  }
  return out;
}

// --- ridge ------------------------------------------------------------------

// Pivots below this fraction of the largest diagonal entry count as singular.
constexpr double kPivotTolerance = 1e-12;

double diagonal_scale(const std::vector<double>& a, int64_t d) {
  double scale = 0.0;
  for (int64_t k = 0; k < d; ++k) scale = std::max(scale, std::abs(a[static_cast<size_t>(k * d + k)]));
  return scale;
}

// Cholesky solve of a symmetric positive definite system; returns false when a
// pivot collapses (singular with zero penalty).
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, int64_t d) {
  const double threshold = kPivotTolerance * diagonal_scale(a, d);
  for (int64_t k = 0; k < d; ++k) {
    double diag = a[static_cast<size_t>(k * d + k)];
    for (int64_t j = 0; j < k; ++j) {
      double l = a[static_cast<size_t>(k * d + j)];
      diag -= l * l;
    }
    if (!(diag > threshold) || threshold == 0.0) return false;
    double lkk = std::sqrt(diag);
    a[static_cast<size_t>(k * d + k)] = lkk;
    for (int64_t i = k + 1; i < d; ++i) {
      double v = a[static_cast<size_t>(i * d + k)];
      for (int64_t j = 0; j < k; ++j) {
        v -= a[static_cast<size_t>(i * d + j)] * a[static_cast<size_t>(k * d + j)];
      }
      a[static_cast<size_t>(i * d + k)] = v / lkk;
    }
  }
  // forward then backward substitution
  for (int64_t i = 0; i < d; ++i) {
    double v = b[static_cast<size_t>(i)];
    for (int64_t j = 0; j < i; ++j) v -= a[static_cast<size_t>(i * d + j)] * b[static_cast<size_t>(j)];
    b[static_cast<size_t>(i)] = v / a[static_cast<size_t>(i * d + i)];
  }
  for (int64_t i = d - 1; i >= 0; --i) {
    double v = b[static_cast<size_t>(i)];
    for (int64_t j = i + 1; j < d; ++j) v -= a[static_cast<size_t>(j * d + i)] * b[static_cast<size_t>(j)];
    b[static_cast<size_t>(i)] = v / a[static_cast<size_t>(i * d + i)];
  }
  return true;
}

bool gauss_solve(std::vector<double>& a, std::vector<double>& b, int64_t d) {
  const double threshold = kPivotTolerance * diagonal_scale(a, d);
  for (int64_t k = 0; k < d; ++k) {
    int64_t pivot = k;
    double best = std::abs(a[static_cast<size_t>(k * d + k)]);
    for (int64_t i = k + 1; i < d; ++i) {
      double v = std::abs(a[static_cast<size_t>(i * d + k)]);
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (!(best > threshold)) return false;
    if (pivot != k) {
      for (int64_t j = 0; j < d; ++j) {
        std::swap(a[static_cast<size_t>(k * d + j)], a[static_cast<size_t>(pivot * d + j)]);
      }
      std::swap(b[static_cast<size_t>(k)], b[static_cast<size_t>(pivot)]);
    }
    double akk = a[static_cast<size_t>(k * d + k)];
    for (int64_t i = k + 1; i < d; ++i) {
      double f = a[static_cast<size_t>(i * d + k)] / akk;
      if (f == 0.0) continue;
      for (int64_t j = k; j < d; ++j) {
        a[static_cast<size_t>(i * d + j)] -= f * a[static_cast<size_t>(k * d + j)];
      }
      b[static_cast<size_t>(i)] -= f * b[static_cast<size_t>(k)];
    }
  }
  for (int64_t i = d - 1; i >= 0; --i) {
    double v = b[static_cast<size_t>(i)];
    for (int64_t j = i + 1; j < d; ++j) v -= a[static_cast<size_t>(i * d + j)] * b[static_cast<size_t>(j)];
    b[static_cast<size_t>(i)] = v / a[static_cast<size_t>(i * d + i)];
  }
  return true;
}

FittedModel fit_ridge(const LearnerSpec& spec, const FitData& data) {
  const int64_t n = data.X.rows();
  const int64_t d = data.X.cols();

  double sw = 0.0;
  std::vector<double> x_mean(static_cast<size_t>(d), 0.0);
  double y_mean = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double wi = data.w[static_cast<size_t>(i)];
    sw += wi;
    y_mean += wi * data.y[static_cast<size_t>(i)];
    auto row = data.X.row(i);
    for (int64_t j = 0; j < d; ++j) x_mean[static_cast<size_t>(j)] += wi * row[static_cast<size_t>(j)];
  }
  for (auto& v : x_mean) v /= sw;
  y_mean /= sw;

  // Centered normal equations; the penalty touches slopes only, so the
  // intercept stays unpenalized.
  std::vector<double> a(static_cast<size_t>(d * d), 0.0);
  std::vector<double> b(static_cast<size_t>(d), 0.0);
  std::vector<double> xc(static_cast<size_t>(d));
  for (int64_t i = 0; i < n; ++i) {
    double wi = data.w[static_cast<size_t>(i)];
    auto row = data.X.row(i);
    for (int64_t j = 0; j < d; ++j) xc[static_cast<size_t>(j)] = row[static_cast<size_t>(j)] - x_mean[static_cast<size_t>(j)];
    double yc = data.y[static_cast<size_t>(i)] - y_mean;
    for (int64_t j = 0; j < d; ++j) {
      double wx = wi * xc[static_cast<size_t>(j)];
      b[static_cast<size_t>(j)] += wx * yc;
      for (int64_t k = j; k < d; ++k) {
        a[static_cast<size_t>(j * d + k)] += wx * xc[static_cast<size_t>(k)];
      }
    }
  }
  for (int64_t j = 0; j < d; ++j) {
    a[static_cast<size_t>(j * d + j)] += spec.ridge_penalty;
    for (int64_t k = j + 1; k < d; ++k) {
      a[static_cast<size_t>(k * d + j)] = a[static_cast<size_t>(j * d + k)];
    }
  }

  std::vector<double> a_copy = a;
  std::vector<double> beta = b;
  if (!cholesky_solve(a_copy, beta, d)) {
    beta = b;
    require(gauss_solve(a, beta, d), errc::domain,
            "ridge: singular design; add a positive penalty");
  }

  double intercept = y_mean;
  for (int64_t j = 0; j < d; ++j) intercept -= beta[static_cast<size_t>(j)] * x_mean[static_cast<size_t>(j)];
  return FittedModel(d, LinearParams{std::move(beta), intercept}, spec);
}

// --- tree -------------------------------------------------------------------

struct Moments {
  double sw = 0.0;
  double swy = 0.0;
  double swyy = 0.0;

  void add(double w, double y) {
    sw += w;
    swy += w * y;
    swyy += w * y * y;
  }
  double sse() const { return sw > 0.0 ? std::max(0.0, swyy - swy * swy / sw) : 0.0; }
};

class TreeBuilder {
public:
  TreeBuilder(const FitData& data, const LearnerSpec& spec, std::vector<int64_t> features)
      : data_(data), spec_(spec), features_(std::move(features)) {}

  TreeParams build(std::vector<int64_t> rows) {
    nodes_.clear();
    grow(std::move(rows), 0);
    return TreeParams{std::move(nodes_)};
  }

private:
  int32_t grow(std::vector<int64_t> rows, int64_t depth) {
    const int32_t index = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(TreeNode{});

    Moments m;
    double y_sum = 0.0;
    for (int64_t i : rows) {
      m.add(data_.w[static_cast<size_t>(i)], data_.y[static_cast<size_t>(i)]);
      y_sum += data_.y[static_cast<size_t>(i)];
    }
    const double mean = m.sw > 0.0 ? m.swy / m.sw : y_sum / static_cast<double>(rows.size());
    const double node_sse = m.sse();

    nodes_[static_cast<size_t>(index)].value = mean;
    if (depth >= spec_.max_depth || static_cast<int64_t>(rows.size()) < 2 * spec_.min_leaf ||
        node_sse <= 0.0) {
      return index;
    }

    // Best split: maximum weighted variance reduction. Ties keep the first
    // candidate in (feature index, threshold) order.
    double best_gain = 0.0;
    int64_t best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int64_t>> vals(rows.size());

    for (int64_t f : features_) {
      for (size_t k = 0; k < rows.size(); ++k) {
        vals[k] = {data_.X(rows[k], f), rows[k]};
      }
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (vals.front().first == vals.back().first) continue;

      Moments left;
      size_t k = 0;
      while (k < vals.size()) {
        // absorb the whole group of equal values
        double v = vals[k].first;
        while (k < vals.size() && vals[k].first == v) {
          left.add(data_.w[static_cast<size_t>(vals[k].second)],
                   data_.y[static_cast<size_t>(vals[k].second)]);
          ++k;
        }
        if (k == vals.size()) break;
        const int64_t left_count = static_cast<int64_t>(k);
        const int64_t right_count = static_cast<int64_t>(vals.size()) - left_count;
        if (left_count < spec_.min_leaf || right_count < spec_.min_leaf) continue;

        const double next = vals[k].first;
        const double threshold = v + (next - v) / 2.0;
        if (!(threshold >= v && threshold < next)) continue;

        Moments right;
        right.sw = m.sw - left.sw;
        right.swy = m.swy - left.swy;
        right.swyy = m.swyy - left.swyy;
        const double gain = node_sse - left.sse() - right.sse();
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }

    if (best_feature < 0) return index;

    std::vector<int64_t> left_rows;
    std::vector<int64_t> right_rows;
    for (int64_t i : rows) {
      if (data_.X(i, best_feature) <= best_threshold) left_rows.push_back(i);
      else right_rows.push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<size_t>(index)].feature = static_cast<int32_t>(best_feature);
    nodes_[static_cast<size_t>(index)].threshold = best_threshold;
    const int32_t left = grow(std::move(left_rows), depth + 1);
    const int32_t right = grow(std::move(right_rows), depth + 1);
    nodes_[static_cast<size_t>(index)].left = left;
    nodes_[static_cast<size_t>(index)].right = right;
    return index;
  }

  const FitData& data_;
  const LearnerSpec& spec_;
  std::vector<int64_t> features_;
  std::vector<TreeNode> nodes_;
};

FittedModel fit_tree(const LearnerSpec& spec, const FitData& data) {
  std::vector<int64_t> features(static_cast<size_t>(data.X.cols()));
  std::iota(features.begin(), features.end(), 0);
  std::vector<int64_t> rows(static_cast<size_t>(data.X.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder(data, spec, std::move(features));
  return FittedModel(data.X.cols(), builder.build(std::move(rows)), spec);
}

FittedModel fit_forest(const LearnerSpec& spec, const FitData& data) {
  const int64_t n = data.X.rows();
  const int64_t d = data.X.cols();
  int64_t n_features;
  if (spec.feature_subsample <= 0.0) {
    n_features = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  } else {
    n_features = static_cast<int64_t>(std::ceil(spec.feature_subsample * static_cast<double>(d)));
  }
  n_features = std::clamp<int64_t>(n_features, 1, d);
  const int64_t n_draws =
      std::max<int64_t>(1, std::llround(spec.row_subsample * static_cast<double>(n)));

  std::vector<TreeParams> trees(static_cast<size_t>(spec.n_trees));
  parallel::parallel_for(spec.n_trees, [&](int64_t t) {
    rng::Engine eng(rng::derive(spec.seed_salt, "tree", static_cast<uint64_t>(t)));
    std::vector<int64_t> feats = eng.sample_without_replacement(d, n_features);
    std::sort(feats.begin(), feats.end());
    std::vector<int64_t> rows(static_cast<size_t>(n_draws));
    for (auto& r : rows) r = static_cast<int64_t>(eng.below(static_cast<uint64_t>(n)));
    TreeBuilder builder(data, spec, std::move(feats));
    trees[static_cast<size_t>(t)] = builder.build(std::move(rows));
  });
  return FittedModel(d, ForestParams{std::move(trees)}, spec);
}

double predict_tree(const TreeParams& tree, std::span<const double> x) {
  int32_t node = 0;
  for (;;) {
    const TreeNode& nd = tree.nodes[static_cast<size_t>(node)];
    if (nd.is_leaf()) return nd.value;
    node = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
}

}  // namespace

std::string learner_kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::ridge: return "ridge";
    case LearnerKind::tree: return "tree";
    case LearnerKind::forest: return "forest";
    case LearnerKind::fixed_partition_mean: return "fixed_partition_mean";
  }
  fail(errc::internal, "unknown learner kind");
}

LearnerKind learner_kind_from(const std::string& name) {
  if (name == "ridge") return LearnerKind::ridge;
  if (name == "tree") return LearnerKind::tree;
  if (name == "forest") return LearnerKind::forest;
  if (name == "fixed_partition_mean") return LearnerKind::fixed_partition_mean;
  fail_invalid("unknown learner kind '" + name + "'");
}

void LearnerSpec::validate() const {
  require(ridge_penalty >= 0.0, errc::invalid_argument, "learner: ridge_penalty must be >= 0");
  require(max_depth >= 0 && max_depth <= 64, errc::invalid_argument,
          "learner: max_depth must be in [0, 64]");
  require(min_leaf >= 1, errc::invalid_argument, "learner: min_leaf must be >= 1");
  require(n_trees >= 1, errc::invalid_argument, "learner: n_trees must be >= 1");
  require(feature_subsample <= 1.0, errc::invalid_argument,
          "learner: feature_subsample must be in (0, 1] (or <= 0 for the default)");
  require(row_subsample > 0.0 && row_subsample <= 1.0, errc::invalid_argument,
          "learner: row_subsample must be in (0, 1]");
}

nlohmann::json LearnerSpec::to_json() const {
  return {
      {"kind", learner_kind_name(kind)},
      {"ridge_penalty", ridge_penalty},
      {"max_depth", max_depth},
      {"min_leaf", min_leaf},
      {"n_trees", n_trees},
      {"feature_subsample", feature_subsample},
      {"row_subsample", row_subsample},
      {"seed_salt", seed_salt},
  };
}

LearnerSpec LearnerSpec::from_json(const nlohmann::json& j) {
  LearnerSpec spec;
  if (j.contains("kind")) spec.kind = learner_kind_from(j.at("kind").get<std::string>());
  spec.ridge_penalty = j.value("ridge_penalty", spec.ridge_penalty);
  spec.max_depth = j.value("max_depth", spec.max_depth);
  spec.min_leaf = j.value("min_leaf", spec.min_leaf);
  spec.n_trees = j.value("n_trees", spec.n_trees);
  spec.feature_subsample = j.value("feature_subsample", spec.feature_subsample);
  spec.row_subsample = j.value("row_subsample", spec.row_subsample);
  spec.seed_salt = j.value("seed_salt", spec.seed_salt);
  spec.validate();
  return spec;
}

bool Box::contains(std::span<const double> x) const {
  require(x.size() == bounds.size(), errc::invalid_argument, "box: dimension mismatch");
  for (size_t j = 0; j < bounds.size(); ++j) {
    if (!(x[j] >= bounds[j].first && x[j] < bounds[j].second)) return false;
  }
  return true;
}

int64_t LeafPartition::leaf_of(std::span<const double> x) const {
  for (size_t b = 0; b < boxes.size(); ++b) {
    if (boxes[b].contains(x)) return static_cast<int64_t>(b);
  }
  fail_domain("leaf partition: row falls outside every box");
}

FittedModel::FittedModel(int64_t dim, LinearParams params, std::optional<LearnerSpec> spec)
    : kind_(LearnerKind::ridge), dim_(dim), params_(std::move(params)), spec_(std::move(spec)) {}
FittedModel::FittedModel(int64_t dim, TreeParams params, std::optional<LearnerSpec> spec)
    : kind_(LearnerKind::tree), dim_(dim), params_(std::move(params)), spec_(std::move(spec)) {}
FittedModel::FittedModel(int64_t dim, ForestParams params, std::optional<LearnerSpec> spec)
    : kind_(LearnerKind::forest), dim_(dim), params_(std::move(params)), spec_(std::move(spec)) {}
FittedModel::FittedModel(int64_t dim, LeafMeanParams params, std::optional<LearnerSpec> spec)
    : kind_(LearnerKind::fixed_partition_mean), dim_(dim), params_(std::move(params)),
      spec_(std::move(spec)) {}

const LinearParams& FittedModel::linear() const { return std::get<LinearParams>(params_); }
const TreeParams& FittedModel::tree() const { return std::get<TreeParams>(params_); }
const ForestParams& FittedModel::forest() const { return std::get<ForestParams>(params_); }
const LeafMeanParams& FittedModel::leaf_means() const { return std::get<LeafMeanParams>(params_); }

double FittedModel::predict_row(std::span<const double> x) const {
  require(static_cast<int64_t>(x.size()) == dim_, errc::invalid_argument,
          "predict: feature dimension mismatch");
  switch (kind_) {
    case LearnerKind::ridge: {
      const auto& p = linear();
      double v = p.intercept;
      for (size_t j = 0; j < x.size(); ++j) v += p.coef[j] * x[j];
      return v;
    }
    case LearnerKind::tree:
      return predict_tree(tree(), x);
    case LearnerKind::forest: {
      const auto& p = forest();
      double sum = 0.0;
      for (const auto& t : p.trees) sum += predict_tree(t, x);
      return sum / static_cast<double>(p.trees.size());
    }
    case LearnerKind::fixed_partition_mean: {
      const auto& p = leaf_means();
      return p.values[static_cast<size_t>(p.partition.leaf_of(x))];
    }
  }
  fail(errc::internal, "predict: unknown model kind");
}

std::vector<double> FittedModel::predict(const Matrix& X) const {
  require(X.cols() == dim_ || X.rows() == 0, errc::invalid_argument,
          "predict: feature dimension mismatch");
  std::vector<double> out(static_cast<size_t>(X.rows()));
  for (int64_t i = 0; i < X.rows(); ++i) out[static_cast<size_t>(i)] = predict_row(X.row(i));
  return out;
}

namespace {

nlohmann::json tree_to_json(const TreeParams& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    nodes.push_back({{"f", nd.feature}, {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}, {"v", nd.value}});
  }
  return nodes;
}

TreeParams tree_from_json(const nlohmann::json& j) {
  TreeParams tree;
  for (const auto& nd : j) {
    tree.nodes.push_back(TreeNode{nd.at("f").get<int32_t>(), nd.at("t").get<double>(),
                                  nd.at("l").get<int32_t>(), nd.at("r").get<int32_t>(),
                                  nd.at("v").get<double>()});
  }
  require(!tree.nodes.empty(), errc::parse, "model: empty tree");
  return tree;
}

}  // namespace

nlohmann::json FittedModel::to_json() const {
  nlohmann::json j{{"format_version", kModelFormatVersion},
                   {"kind", learner_kind_name(kind_)},
                   {"dim", dim_}};
  if (spec_) j["hyperparameters"] = spec_->to_json();
  switch (kind_) {
    case LearnerKind::ridge:
      j["coef"] = linear().coef;
      j["intercept"] = linear().intercept;
      break;
    case LearnerKind::tree:
      j["nodes"] = tree_to_json(tree());
      break;
    case LearnerKind::forest: {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : forest().trees) trees.push_back(tree_to_json(t));
      j["trees"] = std::move(trees);
      break;
    }
    case LearnerKind::fixed_partition_mean: {
      const auto& p = leaf_means();
      nlohmann::json boxes = nlohmann::json::array();
      for (const auto& box : p.partition.boxes) {
        nlohmann::json bounds = nlohmann::json::array();
        for (const auto& [lo, hi] : box.bounds) bounds.push_back({lo, hi});
        boxes.push_back(std::move(bounds));
      }
      j["boxes"] = std::move(boxes);
      j["values"] = p.values;
      j["fallback"] = p.fallback;
      break;
    }
  }
  return j;
}

FittedModel FittedModel::from_json(const nlohmann::json& j) {
  require(j.value("format_version", int64_t{-1}) == kModelFormatVersion, errc::parse,
          "model: unsupported format_version");
  const LearnerKind kind = learner_kind_from(j.at("kind").get<std::string>());
  const int64_t dim = j.at("dim").get<int64_t>();
  std::optional<LearnerSpec> spec;
  if (j.contains("hyperparameters")) spec = LearnerSpec::from_json(j.at("hyperparameters"));
  switch (kind) {
    case LearnerKind::ridge: {
      LinearParams p{j.at("coef").get<std::vector<double>>(), j.at("intercept").get<double>()};
      require(static_cast<int64_t>(p.coef.size()) == dim, errc::parse, "model: coef size mismatch");
      return FittedModel(dim, std::move(p), std::move(spec));
    }
    case LearnerKind::tree:
      return FittedModel(dim, tree_from_json(j.at("nodes")), std::move(spec));
    case LearnerKind::forest: {
      ForestParams p;
      for (const auto& t : j.at("trees")) p.trees.push_back(tree_from_json(t));
      require(!p.trees.empty(), errc::parse, "model: empty forest");
      return FittedModel(dim, std::move(p), std::move(spec));
    }
    case LearnerKind::fixed_partition_mean: {
      LeafMeanParams p;
      for (const auto& bj : j.at("boxes")) {
        Box box;
        for (const auto& bounds : bj) {
          box.bounds.emplace_back(bounds.at(0).get<double>(), bounds.at(1).get<double>());
        }
        p.partition.boxes.push_back(std::move(box));
      }
      p.values = j.at("values").get<std::vector<double>>();
      p.fallback = j.at("fallback").get<double>();
      require(p.values.size() == p.partition.boxes.size(), errc::parse,
              "model: leaf value count mismatch");
      return FittedModel(dim, std::move(p), std::move(spec));
    }
  }
  fail(errc::internal, "model: unknown kind");
}

FittedModel fit(const LearnerSpec& spec, const Matrix& X, std::span<const double> y,
                std::span<const double> weights) {
  spec.validate();
  require(spec.kind != LearnerKind::fixed_partition_mean, errc::invalid_argument,
          "fit: fixed_partition_mean requires fit_fixed_partition_mean with an explicit partition");
  FitData data = prepare(X, y, weights);
  switch (spec.kind) {
    case LearnerKind::ridge: return fit_ridge(spec, data);
    case LearnerKind::tree: return fit_tree(spec, data);
    case LearnerKind::forest: return fit_forest(spec, data);
    default: fail(errc::internal, "fit: unreachable");
  }
}

FittedModel fit_fixed_partition_mean(const LeafPartition& partition, const Matrix& X,
                                     std::span<const double> y, std::span<const double> weights) {
  require(!partition.boxes.empty(), errc::invalid_argument, "fit: partition has no boxes");
  FitData data = prepare(X, y, weights);

  const size_t n_leaves = partition.boxes.size();
  std::vector<double> sw(n_leaves, 0.0);
  std::vector<double> swy(n_leaves, 0.0);
  double total_w = 0.0;
  double total_wy = 0.0;
  for (int64_t i = 0; i < data.X.rows(); ++i) {
    const size_t leaf = static_cast<size_t>(partition.leaf_of(data.X.row(i)));
    const double wi = data.w[static_cast<size_t>(i)];
    sw[leaf] += wi;
    swy[leaf] += wi * data.y[static_cast<size_t>(i)];
    total_w += wi;
    total_wy += wi * data.y[static_cast<size_t>(i)];
  }
  const double fallback = total_wy / total_w;

  LeafMeanParams params;
  params.partition = partition;
  params.fallback = fallback;
  params.values.resize(n_leaves);
  for (size_t l = 0; l < n_leaves; ++l) {
    params.values[l] = sw[l] > 0.0 ? swy[l] / sw[l] : fallback;
  }
  return FittedModel(data.X.cols(), std::move(params));
}

std::vector<double> predict(const FittedModel& model, const Matrix& X) { return model.predict(X); }

}  // namespace ctrl
