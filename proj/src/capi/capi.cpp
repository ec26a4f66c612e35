// capi.cpp — extern "C" implementation of the ctrl shared library. Wraps the
// C++ core behind opaque handles, maps exceptions to status codes, and keeps
// the last error message in thread-local storage.
#include "ctrl/ctrl.h"

#include <cstring>
#include <string>

#include "core/baselines.hpp"
#include "core/cluster.hpp"
#include "core/dataset.hpp"
#include "core/eval.hpp"
#include "core/jsonio.hpp"
#include "core/parallel.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"
#include "core/runner.hpp"
#include "core/shift.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

thread_local std::string t_last_error;

ctrl_status status_of(ctrl::errc code) {
  switch (code) {
    case ctrl::errc::invalid_argument: return CTRL_ERROR_INVALID_ARGUMENT;
    case ctrl::errc::io: return CTRL_ERROR_IO;
    case ctrl::errc::parse: return CTRL_ERROR_PARSE;
    case ctrl::errc::domain: return CTRL_ERROR_DOMAIN;
    case ctrl::errc::internal: return CTRL_ERROR_INTERNAL;
  }
  return CTRL_ERROR_INTERNAL;
}

template <typename Fn>
ctrl_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return CTRL_OK;
  } catch (const ctrl::error& e) {
    t_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    t_last_error = e.what();
    return CTRL_ERROR_PARSE;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return CTRL_ERROR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return CTRL_ERROR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json(const char* text, const char* what) {
  ctrl::require(text != nullptr, ctrl::errc::invalid_argument,
                std::string(what) + ": null JSON argument");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    ctrl::fail_parse(std::string(what) + ": " + e.what());
  }
}

void require_arg(bool cond, const char* what) {
  ctrl::require(cond, ctrl::errc::invalid_argument, what);
}

struct TrainOptions {
  uint64_t seed = 0;
  ctrl::LearnerSpec base;
  ctrl::LearnerSpec resid;
  ctrl::JttConfig jtt;
  ctrl::CtrlSearchOptions search;
  std::optional<std::map<std::string, std::vector<std::string>>> clusters;
};

TrainOptions parse_train_options(const char* options_json) {
  TrainOptions opts;
  nlohmann::json j =
      options_json == nullptr ? nlohmann::json::object() : parse_json(options_json, "options");
  opts.seed = j.value("seed", uint64_t{0});
  if (j.contains("learner")) opts.base = ctrl::LearnerSpec::from_json(j.at("learner"));
  opts.resid = j.contains("residual_learner")
                   ? ctrl::LearnerSpec::from_json(j.at("residual_learner"))
                   : opts.base;
  opts.base.seed_salt = opts.seed;
  opts.resid.seed_salt = opts.seed;
  if (j.contains("jtt")) {
    opts.jtt.error_fraction = j.at("jtt").value("error_fraction", opts.jtt.error_fraction);
    opts.jtt.upweight = j.at("jtt").value("upweight", opts.jtt.upweight);
  }
  if (j.contains("ctrl")) {
    const auto& c = j.at("ctrl");
    opts.search.iters = c.value("iters", opts.search.iters);
    opts.search.candidate_count = c.value("candidate_count", opts.search.candidate_count);
    opts.search.k_max = c.value("k_max", opts.search.k_max);
  }
  opts.search.validate();
  if (j.contains("clusters")) {
    std::map<std::string, std::vector<std::string>> clusters;
    for (const auto& [key, value] : j.at("clusters").items()) {
      clusters[key] = value.get<std::vector<std::string>>();
    }
    opts.clusters = std::move(clusters);
  }
  return opts;
}

}  // namespace

struct ctrl_dataset {
  ctrl::Dataset data;
};

struct ctrl_predictor {
  ctrl::Predictor model;
};

extern "C" {

const char* ctrl_version(void) { return kVersion; }

const char* ctrl_last_error(void) { return t_last_error.c_str(); }

void ctrl_string_free(char* s) { delete[] s; }

ctrl_status ctrl_set_workers(int32_t workers) {
  return guarded([&] {
    require_arg(workers >= 0, "ctrl_set_workers: workers must be >= 0");
    ctrl::parallel::set_workers(workers);
  });
}

ctrl_status ctrl_dataset_load_csv(const char* path, const char* source_column,
                                  const char* outcome_column, ctrl_dataset** out) {
  return guarded([&] {
    require_arg(path != nullptr && out != nullptr, "ctrl_dataset_load_csv: null argument");
    ctrl::CsvSchema schema;
    if (source_column != nullptr) schema.source_column = source_column;
    if (outcome_column != nullptr) schema.outcome_column = outcome_column;
    *out = new ctrl_dataset{ctrl::load_csv(path, schema)};
  });
}

ctrl_status ctrl_dataset_generate(const char* config_json, uint64_t seed, ctrl_dataset** out,
                                  char** truth_json) {
  return guarded([&] {
    require_arg(config_json != nullptr && out != nullptr, "ctrl_dataset_generate: null argument");
    ctrl::SynthConfig cfg = ctrl::synth_config_from_json(parse_json(config_json, "synthetic config"));
    ctrl::SynthResult result = ctrl::generate_synthetic(cfg, seed);
    if (truth_json != nullptr) {
      *truth_json = copy_string(ctrl::synth_truth_to_json(cfg, seed, result.truth).dump(2));
    }
    *out = new ctrl_dataset{std::move(result.data)};
  });
}

ctrl_status ctrl_dataset_write_csv(const ctrl_dataset* ds, const char* path) {
  return guarded([&] {
    require_arg(ds != nullptr && path != nullptr, "ctrl_dataset_write_csv: null argument");
    ctrl::write_csv(ds->data, path);
  });
}

void ctrl_dataset_free(ctrl_dataset* ds) { delete ds; }

int64_t ctrl_dataset_rows(const ctrl_dataset* ds) { return ds == nullptr ? 0 : ds->data.rows(); }

int64_t ctrl_dataset_feature_dim(const ctrl_dataset* ds) {
  return ds == nullptr ? 0 : ds->data.dim();
}

int64_t ctrl_dataset_source_count(const ctrl_dataset* ds) {
  return ds == nullptr ? 0 : ds->data.source_count();
}

ctrl_status ctrl_dataset_source_name(const ctrl_dataset* ds, int64_t index, char** out) {
  return guarded([&] {
    require_arg(ds != nullptr && out != nullptr, "ctrl_dataset_source_name: null argument");
    require_arg(index >= 0 && index < ds->data.source_count(),
                "ctrl_dataset_source_name: index out of range");
    *out = copy_string(ds->data.source_ids()[static_cast<size_t>(index)]);
  });
}

ctrl_status ctrl_dataset_split(const ctrl_dataset* ds, double train_fraction, uint64_t seed,
                               ctrl_dataset** train, ctrl_dataset** validation) {
  return guarded([&] {
    require_arg(ds != nullptr && train != nullptr && validation != nullptr,
                "ctrl_dataset_split: null argument");
    ctrl::SplitPair split = ctrl::stratified_split(ds->data, train_fraction, seed);
    *train = new ctrl_dataset{ds->data.subset(split.train_view)};
    *validation = new ctrl_dataset{ds->data.subset(split.validation_view)};
  });
}

ctrl_status ctrl_dataset_small_sources(const ctrl_dataset* ds, char** json_array) {
  return guarded([&] {
    require_arg(ds != nullptr && json_array != nullptr, "ctrl_dataset_small_sources: null argument");
    *json_array = copy_string(nlohmann::json(ctrl::small_sources(ds->data)).dump());
  });
}

ctrl_status ctrl_predictor_train(const ctrl_dataset* ds, const char* family,
                                 const char* options_json, ctrl_predictor** out) {
  return guarded([&] {
    require_arg(ds != nullptr && family != nullptr && out != nullptr,
                "ctrl_predictor_train: null argument");
    const ctrl::Family f = ctrl::family_from(family);
    TrainOptions opts = parse_train_options(options_json);

    ctrl::Predictor predictor;
    switch (f) {
      case ctrl::Family::global: predictor = ctrl::train_global(ds->data, opts.base); break;
      case ctrl::Family::local: predictor = ctrl::train_local(ds->data, opts.base); break;
      case ctrl::Family::trl: predictor = ctrl::train_trl(ds->data, opts.base, opts.resid); break;
      case ctrl::Family::rwg: predictor = ctrl::train_rwg(ds->data, opts.base); break;
      case ctrl::Family::jtt: predictor = ctrl::train_jtt(ds->data, opts.base, opts.jtt); break;
      case ctrl::Family::ctrl: {
        std::map<std::string, std::vector<std::string>> clusters;
        if (opts.clusters) {
          clusters = *opts.clusters;
        } else {
          const uint64_t search_seed = ctrl::rng::derive(opts.seed, "ctrl-search");
          const int64_t candidate_count =
              std::min<int64_t>(opts.search.candidate_count, ds->data.source_count());
          for (const auto& g : ds->data.source_ids()) {
            ctrl::StabilityWeights w =
                ctrl::stability_weights(ds->data, g, opts.base, opts.resid, opts.search.iters,
                                        candidate_count, search_seed);
            ctrl::ClusterReport report =
                ctrl::select_cluster(ds->data, g, w, opts.base, opts.resid, opts.search.iters,
                                     opts.search.k_max, search_seed);
            clusters[g] = report.cluster;
          }
        }
        predictor = ctrl::train_ctrl(ds->data, opts.base, opts.resid, clusters);
        break;
      }
    }
    *out = new ctrl_predictor{std::move(predictor)};
  });
}

ctrl_status ctrl_predictor_predict(const ctrl_predictor* p, const double* features, int64_t n_rows,
                                   int64_t dim, const char* source, double* out) {
  return guarded([&] {
    require_arg(p != nullptr && source != nullptr && out != nullptr,
                "ctrl_predictor_predict: null argument");
    require_arg(n_rows >= 0 && dim >= 1, "ctrl_predictor_predict: bad shape");
    require_arg(features != nullptr || n_rows == 0, "ctrl_predictor_predict: null features");
    ctrl::Matrix X(n_rows, dim);
    for (int64_t i = 0; i < n_rows; ++i) {
      for (int64_t j = 0; j < dim; ++j) X(i, j) = features[i * dim + j];
    }
    std::vector<double> pred = ctrl::predict_at(p->model, X, source);
    for (size_t i = 0; i < pred.size(); ++i) out[i] = pred[i];
  });
}

ctrl_status ctrl_predictor_to_json(const ctrl_predictor* p, char** out) {
  return guarded([&] {
    require_arg(p != nullptr && out != nullptr, "ctrl_predictor_to_json: null argument");
    *out = copy_string(p->model.to_json().dump(2));
  });
}

ctrl_status ctrl_predictor_from_json(const char* json, ctrl_predictor** out) {
  return guarded([&] {
    require_arg(json != nullptr && out != nullptr, "ctrl_predictor_from_json: null argument");
    *out = new ctrl_predictor{ctrl::Predictor::from_json(parse_json(json, "predictor"))};
  });
}

void ctrl_predictor_free(ctrl_predictor* p) { delete p; }

ctrl_status ctrl_stability_weights(const ctrl_dataset* ds, const char* target,
                                   const char* options_json, char** out_json) {
  return guarded([&] {
    require_arg(ds != nullptr && target != nullptr && out_json != nullptr,
                "ctrl_stability_weights: null argument");
    TrainOptions opts = parse_train_options(options_json);
    const uint64_t search_seed = ctrl::rng::derive(opts.seed, "ctrl-search");
    const int64_t candidate_count =
        std::min<int64_t>(opts.search.candidate_count, ds->data.source_count());
    ctrl::StabilityWeights w = ctrl::stability_weights(
        ds->data, target, opts.base, opts.resid, opts.search.iters, candidate_count, search_seed);
    *out_json = copy_string(w.to_json().dump(2));
  });
}

ctrl_status ctrl_select_cluster(const ctrl_dataset* ds, const char* target,
                                const char* weights_json, const char* options_json,
                                char** out_json) {
  return guarded([&] {
    require_arg(ds != nullptr && target != nullptr && weights_json != nullptr && out_json != nullptr,
                "ctrl_select_cluster: null argument");
    TrainOptions opts = parse_train_options(options_json);
    const uint64_t search_seed = ctrl::rng::derive(opts.seed, "ctrl-search");
    ctrl::StabilityWeights w =
        ctrl::StabilityWeights::from_json(parse_json(weights_json, "stability weights"));
    ctrl::ClusterReport report = ctrl::select_cluster(
        ds->data, target, w, opts.base, opts.resid, opts.search.iters, opts.search.k_max, search_seed);
    *out_json = copy_string(report.to_json().dump(2));
  });
}

ctrl_status ctrl_solve_subset(const char* instance_json, char** out_json) {
  return guarded([&] {
    require_arg(instance_json != nullptr && out_json != nullptr, "ctrl_solve_subset: null argument");
    ctrl::SubsetInstance inst =
        ctrl::SubsetInstance::from_json(parse_json(instance_json, "subset instance"));
    ctrl::SubsetSolution solution = ctrl::solve_subset(inst);
    std::vector<std::string> selected;
    for (size_t m = 0; m < solution.z.size(); ++m) {
      if (solution.z[m]) selected.push_back(inst.candidates[m]);
    }
    nlohmann::json j{{"selected", selected}, {"z", solution.z}, {"objective", solution.objective}};
    *out_json = copy_string(j.dump(2));
  });
}

ctrl_status ctrl_one_se_rule(const double* means, const double* ses, int64_t count, int64_t* k_min,
                             double* cutoff, int64_t* k_star) {
  return guarded([&] {
    require_arg(means != nullptr && ses != nullptr, "ctrl_one_se_rule: null argument");
    require_arg(count >= 1, "ctrl_one_se_rule: count must be >= 1");
    ctrl::OneSeResult r = ctrl::one_se_rule({means, static_cast<size_t>(count)},
                                            {ses, static_cast<size_t>(count)});
    if (k_min != nullptr) *k_min = r.k_min;
    if (cutoff != nullptr) *cutoff = r.cutoff;
    if (k_star != nullptr) *k_star = r.k_star;
  });
}

ctrl_status ctrl_metric_mse(const double* pred, const double* actual, int64_t count, double* out) {
  return guarded([&] {
    require_arg(pred != nullptr && actual != nullptr && out != nullptr,
                "ctrl_metric_mse: null argument");
    require_arg(count >= 1, "ctrl_metric_mse: count must be >= 1");
    *out = ctrl::mse({pred, static_cast<size_t>(count)}, {actual, static_cast<size_t>(count)});
  });
}

ctrl_status ctrl_shift_theoretical_mean(const char* config_json, double* out) {
  return guarded([&] {
    require_arg(config_json != nullptr && out != nullptr,
                "ctrl_shift_theoretical_mean: null argument");
    *out = ctrl::theoretical_excess_mean(
        ctrl::ShiftSimConfig::from_json(parse_json(config_json, "shift config")));
  });
}

ctrl_status ctrl_shift_simulate(const char* config_json, uint64_t seed, char** out_json) {
  return guarded([&] {
    require_arg(config_json != nullptr && out_json != nullptr, "ctrl_shift_simulate: null argument");
    ctrl::ShiftSimConfig cfg = ctrl::ShiftSimConfig::from_json(parse_json(config_json, "shift config"));
    *out_json = copy_string(ctrl::simulate_excess_risk(cfg, seed).to_json().dump(2));
  });
}

ctrl_status ctrl_run_synth(const char* config_json, const char* out_dir) {
  return guarded([&] {
    require_arg(config_json != nullptr && out_dir != nullptr, "ctrl_run_synth: null argument");
    ctrl::run_synth(parse_json(config_json, "run config"), out_dir);
  });
}

ctrl_status ctrl_run_benchmark(const char* config_json, const char* out_dir) {
  return guarded([&] {
    require_arg(config_json != nullptr && out_dir != nullptr, "ctrl_run_benchmark: null argument");
    ctrl::run_benchmark(parse_json(config_json, "run config"), out_dir);
  });
}

ctrl_status ctrl_run_cluster(const char* config_json, const char* out_dir, const char* target) {
  return guarded([&] {
    require_arg(config_json != nullptr && out_dir != nullptr, "ctrl_run_cluster: null argument");
    std::optional<std::string> t;
    if (target != nullptr) t = target;
    ctrl::run_cluster(parse_json(config_json, "run config"), out_dir, t);
  });
}

ctrl_status ctrl_run_theory(const char* config_json, const char* out_dir) {
  return guarded([&] {
    require_arg(config_json != nullptr && out_dir != nullptr, "ctrl_run_theory: null argument");
    ctrl::run_theory(parse_json(config_json, "run config"), out_dir);
  });
}

ctrl_status ctrl_run_evaluate(const char* run_dir, const char* out_dir) {
  return guarded([&] {
    require_arg(run_dir != nullptr && out_dir != nullptr, "ctrl_run_evaluate: null argument");
    ctrl::run_evaluate(run_dir, out_dir);
  });
}

}  // extern "C"
