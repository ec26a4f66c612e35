#include "pipeline.hpp"

#include <algorithm>
#include <set>

#include "rng.hpp"

namespace ctrl {

namespace {

constexpr int64_t kPredictorFormatVersion = 1;
constexpr char kClusterSep = '\x1f';

LearnerSpec with_salt(LearnerSpec spec, uint64_t salt) {
  spec.seed_salt = salt;
  return spec;
}

// Residual model over the pooled rows of `members`, each row's residual taken
// against its own source indicator.
FittedModel fit_cluster_residual(const Dataset& ds, const FittedModel& base,
                                 const LearnerSpec& resid_spec,
                                 const std::vector<std::string>& members, uint64_t salt) {
  std::vector<int64_t> rows;
  for (const auto& m : members) {
    const auto& r = ds.rows_of(m);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  Matrix X(static_cast<int64_t>(rows.size()), ds.dim());
  std::vector<double> target(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    const int64_t i = rows[k];
    for (int64_t j = 0; j < ds.dim(); ++j) X(static_cast<int64_t>(k), j) = ds.features()(i, j);
  }
  // Residuals R_i = Y_i - base(X_i, M_i), computed per member so each block
  // shares one indicator.
  size_t offset = 0;
  for (const auto& m : members) {
    const auto& r = ds.rows_of(m);
    Matrix Xm(static_cast<int64_t>(r.size()), ds.dim());
    for (size_t k = 0; k < r.size(); ++k) {
      for (int64_t j = 0; j < ds.dim(); ++j) Xm(static_cast<int64_t>(k), j) = ds.features()(r[k], j);
    }
    std::vector<double> pred = base_predict_at(base, Xm, ds.source_pos(m), ds.source_count());
    for (size_t k = 0; k < r.size(); ++k) {
      target[offset + k] = ds.outcome()[static_cast<size_t>(r[k])] - pred[k];
    }
    offset += r.size();
  }
  return fit(with_salt(resid_spec, salt), X, target);
}

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::global: return "global";
    case Family::local: return "local";
    case Family::trl: return "trl";
    case Family::ctrl: return "ctrl";
    case Family::rwg: return "rwg";
    case Family::jtt: return "jtt";
  }
  fail(errc::internal, "unknown family");
}

Family family_from(const std::string& name) {
  if (name == "global") return Family::global;
  if (name == "local") return Family::local;
  if (name == "trl") return Family::trl;
  if (name == "ctrl") return Family::ctrl;
  if (name == "rwg") return Family::rwg;
  if (name == "jtt") return Family::jtt;
  fail_invalid("unknown model family '" + name + "'");
}

std::string cluster_key(std::vector<std::string> members) {
  std::sort(members.begin(), members.end());
  std::string key;
  for (size_t i = 0; i < members.size(); ++i) {
    if (i) key.push_back(kClusterSep);
    key += members[i];
  }
  return key;
}

Matrix augmented_features(const Dataset& ds) {
  const int64_t d = ds.dim();
  const int64_t s = ds.source_count();
  Matrix X(ds.rows(), d + s);
  for (int64_t i = 0; i < ds.rows(); ++i) {
    for (int64_t j = 0; j < d; ++j) X(i, j) = ds.features()(i, j);
    X(i, d + ds.source_pos(ds.source()[static_cast<size_t>(i)])) = 1.0;
  }
  return X;
}

Matrix augmented_at(const Matrix& X, int64_t source_pos, int64_t n_sources) {
  require(source_pos >= 0 && source_pos < n_sources, errc::invalid_argument,
          "augmented_at: source position out of range");
  Matrix out(X.rows(), X.cols() + n_sources);
  for (int64_t i = 0; i < X.rows(); ++i) {
    for (int64_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j);
    out(i, X.cols() + source_pos) = 1.0;
  }
  return out;
}

std::vector<double> base_predict_at(const FittedModel& base, const Matrix& X, int64_t source_pos,
                                    int64_t n_sources) {
  return base.predict(augmented_at(X, source_pos, n_sources));
}

std::vector<double> base_predict_own(const FittedModel& base, const Dataset& ds) {
  return base.predict(augmented_features(ds));
}

Predictor train_global(const Dataset& ds, const LearnerSpec& spec) {
  Predictor p;
  p.family = Family::global;
  p.sources = ds.source_ids();
  p.feature_dim = ds.dim();
  p.base = fit(with_salt(spec, rng::derive(spec.seed_salt, "fit/base")), augmented_features(ds),
               ds.outcome());
  return p;
}

Predictor train_local(const Dataset& ds, const LearnerSpec& spec) {
  Predictor p;
  p.family = Family::local;
  p.sources = ds.source_ids();
  p.feature_dim = ds.dim();
  for (const auto& g : ds.source_ids()) {
    const auto& rows = ds.rows_of(g);
    require(rows.size() >= 2, errc::invalid_argument,
            "train_local: source '" + g + "' has fewer than 2 rows");
    Matrix X(static_cast<int64_t>(rows.size()), ds.dim());
    std::vector<double> y(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
      for (int64_t j = 0; j < ds.dim(); ++j) X(static_cast<int64_t>(k), j) = ds.features()(rows[k], j);
      y[k] = ds.outcome()[static_cast<size_t>(rows[k])];
    }
    p.locals.emplace(g, fit(with_salt(spec, rng::derive(spec.seed_salt, "fit/local", g)), X, y));
  }
  return p;
}

Predictor train_trl(const Dataset& ds, const LearnerSpec& base_spec, const LearnerSpec& resid_spec) {
  std::map<std::string, std::vector<std::string>> singletons;
  for (const auto& g : ds.source_ids()) {
    require(ds.rows_of(g).size() >= 2, errc::invalid_argument,
            "train_trl: source '" + g + "' has fewer than 2 rows");
    singletons[g] = {g};
  }
  Predictor p = train_ctrl(ds, base_spec, resid_spec, singletons);
  p.family = Family::trl;
  p.cluster_key_of.clear();
  p.clusters.clear();
  return p;
}

Predictor train_ctrl(const Dataset& ds, const LearnerSpec& base_spec, const LearnerSpec& resid_spec,
                     const std::map<std::string, std::vector<std::string>>& clusters) {
  for (const auto& g : ds.source_ids()) {
    require(clusters.count(g) != 0, errc::invalid_argument,
            "train_ctrl: no cluster given for source '" + g + "'");
  }

  Predictor p;
  p.family = Family::ctrl;
  p.sources = ds.source_ids();
  p.feature_dim = ds.dim();
  p.base = fit(with_salt(base_spec, rng::derive(base_spec.seed_salt, "fit/base")),
               augmented_features(ds), ds.outcome());

  for (const auto& [g, members_in] : clusters) {
    require(ds.has_source(g), errc::invalid_argument, "train_ctrl: unknown target source '" + g + "'");
    require(!members_in.empty(), errc::invalid_argument,
            "train_ctrl: empty cluster for source '" + g + "'");
    std::set<std::string> unique(members_in.begin(), members_in.end());
    require(unique.count(g) != 0, errc::invalid_argument,
            "train_ctrl: cluster for source '" + g + "' does not contain it");
    for (const auto& m : unique) {
      require(ds.has_source(m), errc::invalid_argument,
              "train_ctrl: cluster member '" + m + "' is not a known source");
    }
    std::vector<std::string> members(unique.begin(), unique.end());
    const std::string key = cluster_key(members);
    p.cluster_key_of[g] = key;
    p.clusters[g] = members;
    if (p.residuals.count(key) == 0) {
      p.residuals.emplace(key, fit_cluster_residual(ds, *p.base, resid_spec, members,
                                                    rng::derive(resid_spec.seed_salt, "fit/resid", key)));
    }
  }
  return p;
}

std::vector<double> predict_at(const Predictor& p, const Matrix& X, const std::string& source) {
  auto pos_it = std::lower_bound(p.sources.begin(), p.sources.end(), source);
  require(pos_it != p.sources.end() && *pos_it == source, errc::invalid_argument,
          "predict_at: unknown source '" + source + "'");
  const int64_t source_pos = pos_it - p.sources.begin();
  const int64_t n_sources = static_cast<int64_t>(p.sources.size());
  require(X.cols() == p.feature_dim || X.rows() == 0, errc::invalid_argument,
          "predict_at: feature dimension mismatch");
  if (X.rows() == 0) return {};

  switch (p.family) {
    case Family::global:
    case Family::rwg:
    case Family::jtt:
      return base_predict_at(*p.base, X, source_pos, n_sources);
    case Family::local:
      return p.locals.at(source).predict(X);
    case Family::trl: {
      std::vector<double> out = base_predict_at(*p.base, X, source_pos, n_sources);
      std::vector<double> resid = p.residuals.at(source).predict(X);
      for (size_t i = 0; i < out.size(); ++i) out[i] += resid[i];
      return out;
    }
    case Family::ctrl: {
      std::vector<double> out = base_predict_at(*p.base, X, source_pos, n_sources);
      std::vector<double> resid = p.residuals.at(p.cluster_key_of.at(source)).predict(X);
      for (size_t i = 0; i < out.size(); ++i) out[i] += resid[i];
      return out;
    }
  }
  fail(errc::internal, "predict_at: unknown family");
}

nlohmann::json Predictor::to_json() const {
  nlohmann::json j{{"format_version", kPredictorFormatVersion},
                   {"family", family_name(family)},
                   {"sources", sources},
                   {"feature_dim", feature_dim}};
  if (base) j["base"] = base->to_json();
  if (!locals.empty()) {
    nlohmann::json m;
    for (const auto& [k, v] : locals) m[k] = v.to_json();
    j["locals"] = std::move(m);
  }
  if (!residuals.empty()) {
    nlohmann::json m;
    for (const auto& [k, v] : residuals) m[k] = v.to_json();
    j["residuals"] = std::move(m);
  }
  if (!clusters.empty()) {
    nlohmann::json m;
    for (const auto& [k, v] : clusters) m[k] = v;
    j["clusters"] = std::move(m);
  }
  return j;
}

Predictor Predictor::from_json(const nlohmann::json& j) {
  require(j.value("format_version", int64_t{-1}) == kPredictorFormatVersion, errc::parse,
          "predictor: unsupported format_version");
  Predictor p;
  p.family = family_from(j.at("family").get<std::string>());
  p.sources = j.at("sources").get<std::vector<std::string>>();
  p.feature_dim = j.at("feature_dim").get<int64_t>();
  if (j.contains("base")) p.base = FittedModel::from_json(j.at("base"));
  if (j.contains("locals")) {
    for (const auto& [k, v] : j.at("locals").items()) p.locals.emplace(k, FittedModel::from_json(v));
  }
  if (j.contains("residuals")) {
    for (const auto& [k, v] : j.at("residuals").items()) {
      p.residuals.emplace(k, FittedModel::from_json(v));
    }
  }
  if (j.contains("clusters")) {
    for (const auto& [k, v] : j.at("clusters").items()) {
      std::vector<std::string> members = v.get<std::vector<std::string>>();
      p.clusters[k] = members;
      p.cluster_key_of[k] = cluster_key(members);
    }
  }
  if (p.family == Family::trl) {
    for (const auto& g : p.sources) {
      require(p.residuals.count(g) != 0, errc::parse, "predictor: missing residual model for '" + g + "'");
    }
  }
  return p;
}

}  // namespace ctrl
