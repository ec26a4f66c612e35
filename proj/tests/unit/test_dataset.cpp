#include "doctest.h"

#include <algorithm>
#include <set>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "helpers.hpp"

using namespace ctrl;
using testutil::TempDir;
using testutil::make_dataset;
using testutil::write_file;

TEST_CASE("load_csv transcribes rows and indexes sources") {
  TempDir tmp("csv");
  write_file(tmp.path("d.csv"),
             "x0,x1,source,outcome\n"
             "1,2,A,0\n"
             "3,4,A,1\n"
             "5,6,B,0\n");
  Dataset ds = load_csv(tmp.path("d.csv"));
  CHECK(ds.rows() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.source_ids() == std::vector<std::string>{"A", "B"});
  CHECK(ds.rows_of("A") == std::vector<int64_t>{0, 1});
  CHECK(ds.rows_of("B") == std::vector<int64_t>{2});
  CHECK(ds.features()(1, 1) == 4.0);
  CHECK(ds.outcome()[1] == 1.0);
}

TEST_CASE("load_csv reports bad cells with row and column") {
  TempDir tmp("csv_bad");
  write_file(tmp.path("d.csv"),
             "x0,source,outcome\n"
             "1,A,0\n"
             "2,A,1\n"
             "3,B,0\n"
             "4,B,1\n"
             "5,B,x\n");
  try {
    load_csv(tmp.path("d.csv"));
    FAIL("expected a parse error");
  } catch (const error& e) {
    CHECK(e.code() == errc::parse);
    CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    CHECK(std::string(e.what()).find("outcome") != std::string::npos);
  }
}

TEST_CASE("load_csv error contracts") {
  TempDir tmp("csv_err");
  CHECK_THROWS_AS(load_csv(tmp.path("missing.csv")), error);

  write_file(tmp.path("empty.csv"), "");
  CHECK_THROWS_AS(load_csv(tmp.path("empty.csv")), error);

  write_file(tmp.path("headeronly.csv"), "x0,source,outcome\n");
  CHECK_THROWS_AS(load_csv(tmp.path("headeronly.csv")), error);

  write_file(tmp.path("nosource.csv"), "x0,outcome\n1,0\n");
  CHECK_THROWS_AS(load_csv(tmp.path("nosource.csv")), error);

  write_file(tmp.path("noninfinite.csv"), "x0,source,outcome\ninf,A,0\n");
  CHECK_THROWS_AS(load_csv(tmp.path("noninfinite.csv")), error);
}

TEST_CASE("csv round trip reproduces the dataset") {
  TempDir tmp("csv_rt");
  // source and outcome deliberately not the last columns, ids with commas
  write_file(tmp.path("d.csv"),
             "outcome,f1,source,f2\n"
             "0.125,-1.5,\"west, north\",3.25\n"
             "1,2.5,east,0.0625\n");
  Dataset ds = load_csv(tmp.path("d.csv"));
  CHECK(ds.feature_names() == std::vector<std::string>{"f1", "f2"});
  write_csv(ds, tmp.path("out.csv"));
  Dataset again = load_csv(tmp.path("out.csv"));
  CHECK(ds == again);
}

TEST_CASE("csv handles quoted fields with embedded separators and newlines") {
  TempDir tmp("csv_quote");
  write_file(tmp.path("d.csv"),
             "x0,source,outcome\n"
             "1,\"region, north\nannex\",0\n"
             "2,\"quote\"\"inside\",1\n"
             "3,\"quote\"\"inside\",0\n"
             "4,\"region, north\nannex\",1\n");
  Dataset ds = load_csv(tmp.path("d.csv"));
  CHECK(ds.rows() == 4);
  CHECK(ds.source()[0] == "region, north\nannex");
  CHECK(ds.source()[1] == "quote\"inside");
  write_csv(ds, tmp.path("out.csv"));
  CHECK(load_csv(tmp.path("out.csv")) == ds);
}

TEST_CASE("stratified_split honors the per-source ceiling rule") {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<std::string> src;
  for (int i = 0; i < 10; ++i) { x.push_back({double(i)}); y.push_back(0); src.push_back("A"); }
  for (int i = 0; i < 2; ++i) { x.push_back({double(i)}); y.push_back(1); src.push_back("B"); }
  Dataset ds = make_dataset(x, y, src);

  SplitPair split = stratified_split(ds, 0.8, 7);
  auto count_in = [&](const std::vector<int64_t>& view, const std::string& id) {
    int64_t n = 0;
    for (int64_t i : view) n += ds.source()[size_t(i)] == id;
    return n;
  };
  CHECK(count_in(split.train_view, "A") == 8);
  CHECK(count_in(split.validation_view, "A") == 2);
  // a 2-row source always splits 1/1
  CHECK(count_in(split.train_view, "B") == 1);
  CHECK(count_in(split.validation_view, "B") == 1);

  SplitPair again = stratified_split(ds, 0.8, 7);
  CHECK(split.train_view == again.train_view);
  CHECK(split.validation_view == again.validation_view);
}

TEST_CASE("stratified_split views are exhaustive and disjoint per source") {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<std::string> src;
  const std::vector<std::pair<std::string, int>> sizes{{"a", 2}, {"b", 3}, {"c", 17}, {"d", 101}};
  for (const auto& [id, n] : sizes) {
    for (int i = 0; i < n; ++i) { x.push_back({double(i)}); y.push_back(0); src.push_back(id); }
  }
  Dataset ds = make_dataset(x, y, src);

  for (double f : {0.1, 0.5, 0.8, 0.99}) {
    SplitPair split = stratified_split(ds, f, 3);
    std::set<int64_t> all(split.train_view.begin(), split.train_view.end());
    for (int64_t i : split.validation_view) CHECK(all.insert(i).second);
    CHECK(int64_t(all.size()) == ds.rows());
    for (const auto& [id, n] : sizes) {
      int64_t train_n = 0;
      for (int64_t i : split.train_view) train_n += ds.source()[size_t(i)] == id;
      const int64_t expected =
          std::max<int64_t>(1, std::min<int64_t>(n - 1, int64_t(std::ceil(f * n))));
      CHECK(train_n == expected);
    }
  }

  Dataset tiny = make_dataset({{0.0}, {1.0}, {2.0}}, {0, 0, 0}, {"a", "a", "b"});
  CHECK_THROWS_AS(stratified_split(tiny, 0.8, 1), error);  // b has a single row
}

TEST_CASE("small_sources takes the bottom third with lexicographic ties") {
  auto sized = [](const std::vector<std::pair<std::string, int>>& sizes) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<std::string> src;
    for (const auto& [id, n] : sizes) {
      for (int i = 0; i < n; ++i) { x.push_back({0.0}); y.push_back(0); src.push_back(id); }
    }
    return make_dataset(x, y, src);
  };
  CHECK(small_sources(sized({{"A", 5}, {"B", 50}, {"C", 500}})) == std::vector<std::string>{"A"});
  CHECK(small_sources(sized({{"A", 5}, {"B", 50}})).empty());
  CHECK(small_sources(sized({{"A", 5}, {"B", 5}, {"C", 9}, {"D", 9}, {"E", 9}, {"F", 9}})) ==
        std::vector<std::string>{"A", "B"});
}

TEST_CASE("generate_synthetic meets the configured shape") {
  SynthConfig cfg;  // 40000 individuals, 50 sources, d=20, sizes 40..2000, weights 0.3/0.7
  SynthResult result = generate_synthetic(cfg, 123);
  CHECK(result.data.rows() == 40000);
  CHECK(result.data.source_count() == 50);
  CHECK(result.data.dim() == 20);
  for (const auto& id : result.data.source_ids()) {
    CHECK(result.data.source_size(id) >= 40);
    CHECK(result.data.source_size(id) <= 2000);
  }
  for (double v : result.data.outcome()) CHECK((v == 0.0 || v == 1.0));
  for (const auto& members : result.truth.clusters) {
    CHECK(members.size() >= 2);
    CHECK(members.size() <= 7);
  }
}

TEST_CASE("generate_synthetic is deterministic and seed-sensitive") {
  SynthConfig cfg;
  cfg.n_individuals = 600;
  cfg.n_sources = 6;
  cfg.feature_dim = 4;
  cfg.min_source_size = 20;
  cfg.max_source_size = 300;
  SynthResult a = generate_synthetic(cfg, 42);
  SynthResult b = generate_synthetic(cfg, 42);
  CHECK(a.data == b.data);
  CHECK(a.truth.sizes == b.truth.sizes);
  SynthResult c = generate_synthetic(cfg, 43);
  CHECK_FALSE(a.data == c.data);
}

TEST_CASE("generate_synthetic sizes stay in bounds across seeds") {
  SynthConfig cfg;
  cfg.n_individuals = 1000;
  cfg.n_sources = 12;
  cfg.feature_dim = 3;
  cfg.min_source_size = 25;
  cfg.max_source_size = 200;
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    SynthResult r = generate_synthetic(cfg, seed);
    int64_t total = 0;
    for (const auto& id : r.data.source_ids()) {
      const int64_t n = r.data.source_size(id);
      CHECK(n >= cfg.min_source_size);
      CHECK(n <= cfg.max_source_size);
      total += n;
    }
    CHECK(total == cfg.n_individuals);
  }
}

TEST_CASE("latent cluster members share the base weight vector up to the shift") {
  SynthConfig cfg;
  cfg.n_individuals = 800;
  cfg.n_sources = 10;
  cfg.feature_dim = 6;
  cfg.min_source_size = 30;
  cfg.max_source_size = 200;
  cfg.cluster_size_min = 3;
  cfg.cluster_size_max = 3;
  cfg.weight_shift_sigma = 0.05;
  SynthResult r = generate_synthetic(cfg, 9);
  REQUIRE(!r.truth.clusters.empty());
  for (size_t c = 0; c < r.truth.clusters.size(); ++c) {
    const auto& base = r.truth.cluster_base_weights[c];
    for (const auto& id : r.truth.clusters[c]) {
      const auto& w = r.truth.source_weights.at(id);
      double dist = 0.0;
      for (size_t j = 0; j < w.size(); ++j) dist = std::max(dist, std::abs(w[j] - base[j]));
      CHECK(dist < 6.0 * cfg.weight_shift_sigma);
      CHECK(dist > 0.0);
    }
  }
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.n_individuals = 100;
  cfg.n_sources = 10;
  cfg.min_source_size = 20;  // 10 * 20 > 100
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), error);

  SynthConfig bad_weights;
  bad_weights.global_weight = 0.4;  // 0.4 + 0.7 != 1
  CHECK_THROWS_AS(bad_weights.validate(), error);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(make_dataset({{1.0, std::nan("")}}, {0.0}, {"a"}), error);
  CHECK_THROWS_AS(Dataset::make(testutil::matrix_of({}), {}, {}), error);
  Dataset ds = make_dataset({{1.0}, {2.0}}, {0, 1}, {"a", "b"});
  CHECK_THROWS_AS(ds.source_pos("missing"), error);
  // subsets preserve values and reindex sources
  Dataset sub = ds.subset(std::vector<int64_t>{1});
  CHECK(sub.rows() == 1);
  CHECK(sub.source_ids() == std::vector<std::string>{"b"});
}
