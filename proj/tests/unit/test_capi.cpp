#include "doctest.h"

#include <cstring>
#include <string>
#include <vector>

#include <ctrl/ctrl.h>

#include "helpers.hpp"
#include "json.hpp"

using testutil::TempDir;
using testutil::write_file;

namespace {

// takes ownership of a C string result
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out = s;
  ctrl_string_free(s);
  return out;
}

constexpr const char* kSynthConfig =
    R"({"n_individuals": 400, "n_sources": 5, "feature_dim": 3,
        "min_source_size": 20, "max_source_size": 200})";

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(ctrl_version() != nullptr);
  CHECK(ctrl_dataset_load_csv("/nonexistent/file.csv", nullptr, nullptr, nullptr) ==
        CTRL_ERROR_INVALID_ARGUMENT);  // null out-parameter
  ctrl_dataset* ds = nullptr;
  CHECK(ctrl_dataset_load_csv("/nonexistent/file.csv", nullptr, nullptr, &ds) == CTRL_ERROR_IO);
  CHECK(std::strlen(ctrl_last_error()) > 0);
}

TEST_CASE("dataset lifecycle through the C API") {
  ctrl_dataset* ds = nullptr;
  char* truth = nullptr;
  REQUIRE(ctrl_dataset_generate(kSynthConfig, 9, &ds, &truth) == CTRL_OK);
  CHECK(nlohmann::json::parse(take(truth)).contains("clusters"));
  CHECK(ctrl_dataset_rows(ds) == 400);
  CHECK(ctrl_dataset_feature_dim(ds) == 3);
  CHECK(ctrl_dataset_source_count(ds) == 5);

  char* name = nullptr;
  REQUIRE(ctrl_dataset_source_name(ds, 0, &name) == CTRL_OK);
  CHECK(take(name) == "s00");
  CHECK(ctrl_dataset_source_name(ds, 99, &name) == CTRL_ERROR_INVALID_ARGUMENT);

  TempDir tmp("capi_csv");
  REQUIRE(ctrl_dataset_write_csv(ds, tmp.path("d.csv").c_str()) == CTRL_OK);
  ctrl_dataset* reloaded = nullptr;
  REQUIRE(ctrl_dataset_load_csv(tmp.path("d.csv").c_str(), "source", "outcome", &reloaded) ==
          CTRL_OK);
  CHECK(ctrl_dataset_rows(reloaded) == 400);

  char* small = nullptr;
  REQUIRE(ctrl_dataset_small_sources(ds, &small) == CTRL_OK);
  CHECK(nlohmann::json::parse(take(small)).size() == 1);  // floor(5 / 3)

  ctrl_dataset* train = nullptr;
  ctrl_dataset* valid = nullptr;
  REQUIRE(ctrl_dataset_split(ds, 0.75, 3, &train, &valid) == CTRL_OK);
  CHECK(ctrl_dataset_rows(train) + ctrl_dataset_rows(valid) == 400);
  CHECK(ctrl_dataset_source_count(train) == 5);

  ctrl_dataset_free(train);
  ctrl_dataset_free(valid);
  ctrl_dataset_free(reloaded);
  ctrl_dataset_free(ds);
}

TEST_CASE("predictor training and prediction through the C API") {
  ctrl_dataset* ds = nullptr;
  REQUIRE(ctrl_dataset_generate(kSynthConfig, 5, &ds, nullptr) == CTRL_OK);

  const char* options = R"({"seed": 2, "learner": {"kind": "ridge"}})";
  ctrl_predictor* global = nullptr;
  REQUIRE(ctrl_predictor_train(ds, "global", options, &global) == CTRL_OK);

  const std::vector<double> probe{0.1, -0.3, 0.8, 0.5, 0.0, 0.2};  // two rows
  std::vector<double> pred(2);
  REQUIRE(ctrl_predictor_predict(global, probe.data(), 2, 3, "s01", pred.data()) == CTRL_OK);
  CHECK(std::isfinite(pred[0]));
  CHECK(ctrl_predictor_predict(global, probe.data(), 2, 3, "zz", pred.data()) ==
        CTRL_ERROR_INVALID_ARGUMENT);

  // serialization round trip preserves predictions
  char* json = nullptr;
  REQUIRE(ctrl_predictor_to_json(global, &json) == CTRL_OK);
  const std::string doc = take(json);
  ctrl_predictor* restored = nullptr;
  REQUIRE(ctrl_predictor_from_json(doc.c_str(), &restored) == CTRL_OK);
  std::vector<double> pred2(2);
  REQUIRE(ctrl_predictor_predict(restored, probe.data(), 2, 3, "s01", pred2.data()) == CTRL_OK);
  CHECK(pred == pred2);

  // trl equals ctrl restricted to singleton clusters, through the C surface
  ctrl_predictor* trl = nullptr;
  REQUIRE(ctrl_predictor_train(ds, "trl", options, &trl) == CTRL_OK);
  nlohmann::json with_clusters = nlohmann::json::parse(options);
  with_clusters["clusters"] = nlohmann::json::object();
  for (int i = 0; i < 5; ++i) {
    char* name = nullptr;
    REQUIRE(ctrl_dataset_source_name(ds, i, &name) == CTRL_OK);
    const std::string id = take(name);
    with_clusters["clusters"][id] = {id};
  }
  ctrl_predictor* ctrl_p = nullptr;
  REQUIRE(ctrl_predictor_train(ds, "ctrl", with_clusters.dump().c_str(), &ctrl_p) == CTRL_OK);
  std::vector<double> pt(2), pc(2);
  REQUIRE(ctrl_predictor_predict(trl, probe.data(), 2, 3, "s02", pt.data()) == CTRL_OK);
  REQUIRE(ctrl_predictor_predict(ctrl_p, probe.data(), 2, 3, "s02", pc.data()) == CTRL_OK);
  CHECK(pt == pc);

  ctrl_predictor_free(global);
  ctrl_predictor_free(restored);
  ctrl_predictor_free(trl);
  ctrl_predictor_free(ctrl_p);
  ctrl_dataset_free(ds);
}

TEST_CASE("cluster discovery through the C API") {
  ctrl_dataset* ds = nullptr;
  REQUIRE(ctrl_dataset_generate(kSynthConfig, 8, &ds, nullptr) == CTRL_OK);
  const char* options =
      R"({"seed": 4, "learner": {"kind": "ridge"}, "ctrl": {"iters": 5, "candidate_count": 3, "k_max": 3}})";

  char* weights_json = nullptr;
  REQUIRE(ctrl_stability_weights(ds, "s00", options, &weights_json) == CTRL_OK);
  const std::string weights = take(weights_json);
  CHECK(nlohmann::json::parse(weights).at("weights").at("s00") == 1.0);

  char* report_json = nullptr;
  REQUIRE(ctrl_select_cluster(ds, "s00", weights.c_str(), options, &report_json) == CTRL_OK);
  nlohmann::json report = nlohmann::json::parse(take(report_json));
  CHECK(report.at("cluster")[0] == "s00");
  CHECK(report.at("mse_mean").size() == 3);

  ctrl_dataset_free(ds);
}

TEST_CASE("subset solving and the 1-SE rule through the C API") {
  const char* instance = R"({
    "target_residuals": [1.0, -1.0],
    "residual_predictions": [[0.9, 0.0], [-0.9, 0.0]],
    "sizes": [10.0, 10.0],
    "candidates": ["g", "m"],
    "target": "g"
  })";
  char* out = nullptr;
  REQUIRE(ctrl_solve_subset(instance, &out) == CTRL_OK);
  nlohmann::json solution = nlohmann::json::parse(take(out));
  CHECK(solution.at("selected") == nlohmann::json::array({"g"}));
  CHECK(solution.at("objective").get<double>() == doctest::Approx(0.02));

  CHECK(ctrl_solve_subset("{not json", &out) == CTRL_ERROR_PARSE);

  const double means[] = {0.50, 0.30, 0.29};
  const double ses[] = {0.02, 0.02, 0.02};
  int64_t k_min = 0, k_star = 0;
  double cutoff = 0.0;
  REQUIRE(ctrl_one_se_rule(means, ses, 3, &k_min, &cutoff, &k_star) == CTRL_OK);
  CHECK(k_min == 3);
  CHECK(cutoff == doctest::Approx(0.31));
  CHECK(k_star == 2);
}

TEST_CASE("metrics and shift theory through the C API") {
  const double pred[] = {0.0, 0.0};
  const double actual[] = {1.0, -1.0};
  double out = 0.0;
  REQUIRE(ctrl_metric_mse(pred, actual, 2, &out) == CTRL_OK);
  CHECK(out == doctest::Approx(1.0));

  const char* config = R"({
    "cell_count": 2000, "leaf_count": 10,
    "sample_sizes": [100, 900], "shift_variance": [0.0, 2.0],
    "leaf_means": 0.0, "leaf_variances": 1.0,
    "cluster": [0, 1], "replicates": 5
  })";
  double theory = 0.0;
  REQUIRE(ctrl_shift_theoretical_mean(config, &theory) == CTRL_OK);
  CHECK(theory / 2000.0 == doctest::Approx(0.0181).epsilon(1e-12));

  char* sim = nullptr;
  REQUIRE(ctrl_shift_simulate(config, 1, &sim) == CTRL_OK);
  nlohmann::json est = nlohmann::json::parse(take(sim));
  CHECK(est.at("replicates") == 5);
  CHECK(est.at("theoretical_mean").get<double>() == doctest::Approx(theory));
}

TEST_CASE("runners through the C API clean up on failure") {
  TempDir tmp("capi_run");
  const std::string cfg = R"({"seed": 2, "synthetic": )" + std::string(kSynthConfig) + "}";
  REQUIRE(ctrl_run_synth(cfg.c_str(), tmp.path("out").c_str()) == CTRL_OK);

  const std::string bad = R"({"seed": 2, "dataset": {"csv": {"path": ")" + tmp.path("nope.csv") +
                          R"("}}})";
  CHECK(ctrl_run_benchmark(bad.c_str(), tmp.path("fail").c_str()) == CTRL_ERROR_IO);
  CHECK(ctrl_run_benchmark(nullptr, tmp.path("fail").c_str()) == CTRL_ERROR_INVALID_ARGUMENT);
}
