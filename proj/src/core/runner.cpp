#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "csv.hpp"
#include "jsonio.hpp"
#include "num_format.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "shift.hpp"

namespace fs = std::filesystem;

namespace ctrl {

namespace {

void log_line(const std::string& msg) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::cerr << "[" << stamp << "] " << msg << "\n";
}

// Records every file written so a failed run can clean up after itself.
class OutputTracker {
public:
  explicit OutputTracker(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  std::string path(const std::string& relative) {
    fs::path p = fs::path(dir_) / relative;
    fs::create_directories(p.parent_path());
    written_.push_back(p.string());
    return p.string();
  }

  const std::string& dir() const { return dir_; }

  void remove_written() {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

private:
  std::string dir_;
  std::vector<std::string> written_;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write file: " + path);
  out << content;
  if (!out) fail_io("write failed: " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_parse(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

std::string model_name(Family family, const std::string& kind) {
  return family_name(family) + "_" + kind;
}

// File-name-safe rendering of a source id; an index prefix keeps names unique
// even after sanitizing or truncating.
std::string source_file_tag(int64_t index, const std::string& id) {
  std::string safe;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '.' || c == '_';
    safe.push_back(ok ? c : '_');
  }
  if (safe.size() > 48) safe.resize(48);
  return std::to_string(index) + "_" + safe;
}

void write_matrix_csv(const std::string& path, const PredictionMatrix& m) {
  std::vector<std::string> header = {"row", "source", "outcome"};
  for (const auto& s : m.sources) header.push_back("pred:" + s);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<size_t>(m.preds.rows()));
  for (int64_t i = 0; i < m.preds.rows(); ++i) {
    std::vector<std::string> row = {format_int(i), m.row_source[static_cast<size_t>(i)],
                                    format_double(m.outcome[static_cast<size_t>(i)])};
    for (int64_t c = 0; c < m.preds.cols(); ++c) row.push_back(format_double(m.preds(i, c)));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

PredictionMatrix read_matrix_csv(const std::string& path) {
  csv::Table table = csv::read_file(path);
  require(table.header.size() >= 4 && table.header[0] == "row" && table.header[1] == "source" &&
              table.header[2] == "outcome",
          errc::parse, "prediction matrix csv: unexpected header in " + path);
  PredictionMatrix m;
  for (size_t j = 3; j < table.header.size(); ++j) {
    require(table.header[j].rfind("pred:", 0) == 0, errc::parse,
            "prediction matrix csv: unexpected column '" + table.header[j] + "' in " + path);
    m.sources.push_back(table.header[j].substr(5));
  }
  const int64_t n = static_cast<int64_t>(table.rows.size());
  m.preds = Matrix(n, static_cast<int64_t>(m.sources.size()));
  m.row_source.resize(static_cast<size_t>(n));
  m.outcome.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    require(row.size() == table.header.size(), errc::parse,
            "prediction matrix csv: ragged row in " + path);
    m.row_source[static_cast<size_t>(i)] = row[1];
    double v;
    require(try_parse_double(row[2], v), errc::parse, "prediction matrix csv: bad outcome in " + path);
    m.outcome[static_cast<size_t>(i)] = v;
    for (size_t j = 3; j < row.size(); ++j) {
      require(try_parse_double(row[j], v), errc::parse,
              "prediction matrix csv: bad prediction in " + path);
      m.preds(i, static_cast<int64_t>(j - 3)) = v;
    }
  }
  m.validate();
  return m;
}

// --- evaluation report -------------------------------------------------------

struct EvalInputs {
  std::vector<std::string> kinds;
  std::vector<Family> families;
  std::map<std::string, PredictionMatrix> matrices;  // by model_name
  std::vector<std::string> small;
  MetricOptions metrics;
};

struct EvalOutput {
  nlohmann::json report;
  std::vector<std::string> table_header;
  std::vector<std::vector<std::string>> table_rows;
  std::vector<std::string> sweep_header;
  std::vector<std::vector<std::string>> sweep_rows;
};

EvalOutput build_eval(const EvalInputs& in) {
  EvalOutput out;
  const std::set<std::string> small_set(in.small.begin(), in.small.end());

  nlohmann::json cells;
  nlohmann::json ranks;
  nlohmann::json eligible;

  std::map<std::string, std::map<Family, double>> avg_rank;  // kind -> family -> rank
  std::map<std::string, std::map<Family, std::map<std::string, double>>> cell_values;

  for (const auto& kind : in.kinds) {
    std::map<std::string, PredictionMatrix> kind_matrices;
    for (Family family : in.families) {
      kind_matrices.emplace(family_name(family), in.matrices.at(model_name(family, kind)));
    }

    // RWA at the headline threshold; undefined when no source clears min_count.
    std::map<std::string, double> rwa_values;
    bool rwa_defined = false;
    try {
      RwaResult r = rwa(kind_matrices, in.metrics.rwa_q, in.metrics.min_count);
      rwa_values = std::move(r.value);
      eligible[kind] = r.eligible_sources;
      rwa_defined = true;
    } catch (const error& e) {
      if (e.code() != errc::domain) throw;
      log_line("eval: RWA undefined for kind '" + kind + "' (" + e.what() + ")");
    }

    bool small_defined = !small_set.empty();
    for (Family family : in.families) {
      const auto& m = kind_matrices.at(family_name(family));
      auto& values = cell_values[kind][family];
      values["mse"] = mse(m.own_predictions(), m.outcome);
      if (small_defined) {
        try {
          values["small_mse"] = small_mse(m, small_set);
        } catch (const error& e) {
          if (e.code() != errc::domain) throw;
          small_defined = false;
        }
      }
      if (rwa_defined) values["rwa"] = rwa_values.at(family_name(family));
    }
    if (!small_defined) {
      for (auto& [family, values] : cell_values[kind]) values.erase("small_mse");
    }

    for (Family family : in.families) {
      nlohmann::json cell;
      const auto& values = cell_values[kind][family];
      cell["mse"] = values.at("mse");
      cell["small_mse"] = values.count("small_mse") ? nlohmann::json(values.at("small_mse"))
                                                    : nlohmann::json(nullptr);
      cell["rwa"] =
          values.count("rwa") ? nlohmann::json(values.at("rwa")) : nlohmann::json(nullptr);
      cells[model_name(family, kind)] = std::move(cell);
    }

    // Ranks per metric across families, then the cross-metric average.
    if (in.families.size() >= 2) {
      std::map<std::string, bool> orientation{{"mse", false}};
      if (small_defined) orientation["small_mse"] = false;
      if (rwa_defined) orientation["rwa"] = true;

      std::map<std::string, std::map<std::string, double>> by_model;
      for (Family family : in.families) {
        by_model[family_name(family)] = cell_values[kind][family];
      }
      nlohmann::json per_metric;
      for (const auto& [metric, higher] : orientation) {
        std::map<std::string, double> metric_values;
        for (const auto& [model, values] : by_model) metric_values[model] = values.at(metric);
        per_metric[metric] = rank_models(metric_values, higher);
      }
      const auto averages = average_ranks(by_model, orientation);
      ranks[kind] = {{"per_metric", std::move(per_metric)}, {"average", averages}};
      for (Family family : in.families) {
        avg_rank[kind][family] = averages.at(family_name(family));
      }
    }
  }

  // Threshold sweep, one block of rows per kind.
  out.sweep_header = {"model", "kind"};
  for (double q : in.metrics.rwa_thresholds) out.sweep_header.push_back("q=" + format_double(q));
  for (const auto& kind : in.kinds) {
    std::map<std::string, PredictionMatrix> kind_matrices;
    for (Family family : in.families) {
      kind_matrices.emplace(family_name(family), in.matrices.at(model_name(family, kind)));
    }
    const auto sweep = rwa_sweep(kind_matrices, in.metrics.rwa_thresholds, in.metrics.min_count);
    for (Family family : in.families) {
      std::vector<std::string> row = {family_name(family), kind};
      for (const auto& entry : sweep) {
        row.push_back(entry.defined ? format_double(entry.value.at(family_name(family))) : "NA");
      }
      out.sweep_rows.push_back(std::move(row));
    }
  }

  out.table_header = {"model"};
  for (const auto& kind : in.kinds) {
    out.table_header.push_back("mse:" + kind);
    out.table_header.push_back("small_mse:" + kind);
    out.table_header.push_back("rwa:" + kind);
    out.table_header.push_back("avg_rank:" + kind);
  }
  for (Family family : in.families) {
    std::vector<std::string> row = {family_name(family)};
    for (const auto& kind : in.kinds) {
      const auto& values = cell_values[kind][family];
      row.push_back(format_double(values.at("mse")));
      row.push_back(values.count("small_mse") ? format_double(values.at("small_mse")) : "NA");
      row.push_back(values.count("rwa") ? format_double(values.at("rwa")) : "NA");
      row.push_back(avg_rank.count(kind) && avg_rank.at(kind).count(family)
                        ? format_double(avg_rank.at(kind).at(family))
                        : "NA");
    }
    out.table_rows.push_back(std::move(row));
  }

  std::vector<std::string> family_names;
  for (Family f : in.families) family_names.push_back(family_name(f));
  out.report = {{"format_version", 1},
                {"kinds", in.kinds},
                {"families", family_names},
                {"small_sources", in.small},
                {"metrics",
                 {{"rwa_q", in.metrics.rwa_q},
                  {"rwa_thresholds", in.metrics.rwa_thresholds},
                  {"min_count", in.metrics.min_count}}},
                {"cells", std::move(cells)},
                {"rwa_eligible", std::move(eligible)},
                {"ranks", std::move(ranks)}};
  return out;
}

SynthConfig synth_config_of(const nlohmann::json& config) {
  if (config.contains("synthetic")) return synth_config_from_json(config.at("synthetic"));
  if (config.contains("dataset") && config.at("dataset").contains("synthetic")) {
    return synth_config_from_json(config.at("dataset").at("synthetic"));
  }
  fail_invalid("synth: config has no 'synthetic' section");
}

}  // namespace

void CtrlSearchOptions::validate() const {
  require(iters >= 1, errc::invalid_argument, "ctrl: iters must be >= 1");
  require(candidate_count >= 1 && candidate_count <= kMaxSubsetCandidates, errc::invalid_argument,
          "ctrl: candidate_count must be in [1, 20]");
  require(k_max >= 1, errc::invalid_argument, "ctrl: k_max must be >= 1");
}

void MetricOptions::validate() const {
  require(rwa_q > 0.0 && rwa_q <= 1.0, errc::invalid_argument, "metrics: rwa_q must be in (0, 1]");
  require(!rwa_thresholds.empty(), errc::invalid_argument, "metrics: rwa_thresholds is empty");
  for (double q : rwa_thresholds) {
    require(q > 0.0 && q <= 1.0, errc::invalid_argument,
            "metrics: rwa thresholds must be in (0, 1]");
  }
  require(min_count >= 1, errc::invalid_argument, "metrics: min_count must be >= 1");
}

void RunConfig::validate() const {
  require(csv_path.has_value() != synthetic.has_value(), errc::invalid_argument,
          "config: dataset must be exactly one of csv or synthetic");
  require(train_fraction > 0.0 && train_fraction < 1.0, errc::invalid_argument,
          "config: train_fraction must be in (0, 1)");
  require(!families.empty(), errc::invalid_argument, "config: at least one model family required");
  std::set<Family> family_set(families.begin(), families.end());
  require(family_set.size() == families.size(), errc::invalid_argument,
          "config: duplicate model family");
  require(!learners.empty(), errc::invalid_argument, "config: at least one learner required");
  std::set<std::string> kinds;
  for (const auto& entry : learners) {
    entry.spec.validate();
    if (entry.residual) entry.residual->validate();
    require(kinds.insert(learner_kind_name(entry.spec.kind)).second, errc::invalid_argument,
            "config: duplicate learner kind");
  }
  ctrl_search.validate();
  jtt.validate();
  metrics.validate();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json dataset;
  if (csv_path) {
    dataset["csv"] = {{"path", *csv_path},
                      {"source_column", schema.source_column},
                      {"outcome_column", schema.outcome_column}};
  }
  if (synthetic) dataset["synthetic"] = synth_config_to_json(*synthetic);

  nlohmann::json learners_json = nlohmann::json::array();
  for (const auto& entry : learners) {
    nlohmann::json e = entry.spec.to_json();
    if (entry.residual) e["residual"] = entry.residual->to_json();
    learners_json.push_back(std::move(e));
  }
  std::vector<std::string> family_names;
  for (Family f : families) family_names.push_back(family_name(f));

  // The worker count is an execution detail, not part of the experiment;
  // leaving it out keeps run snapshots byte-identical across worker counts.
  return {{"seed", seed},
          {"dataset", std::move(dataset)},
          {"train_fraction", train_fraction},
          {"families", family_names},
          {"learners", std::move(learners_json)},
          {"ctrl", {{"iters", ctrl_search.iters},
                    {"candidate_count", ctrl_search.candidate_count},
                    {"k_max", ctrl_search.k_max}}},
          {"jtt", {{"error_fraction", jtt.error_fraction}, {"upweight", jtt.upweight}}},
          {"metrics",
           {{"rwa_q", metrics.rwa_q},
            {"rwa_thresholds", metrics.rwa_thresholds},
            {"min_count", metrics.min_count}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.seed = j.value("seed", uint64_t{0});
  cfg.workers = j.value("workers", int32_t{0});

  if (j.contains("dataset")) {
    const auto& dj = j.at("dataset");
    if (dj.contains("csv")) {
      const auto& cj = dj.at("csv");
      cfg.csv_path = cj.at("path").get<std::string>();
      cfg.schema.source_column = cj.value("source_column", cfg.schema.source_column);
      cfg.schema.outcome_column = cj.value("outcome_column", cfg.schema.outcome_column);
    }
    if (dj.contains("synthetic")) cfg.synthetic = synth_config_from_json(dj.at("synthetic"));
  } else if (j.contains("synthetic")) {
    cfg.synthetic = synth_config_from_json(j.at("synthetic"));
  }

  cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
  if (j.contains("families")) {
    cfg.families.clear();
    for (const auto& f : j.at("families")) cfg.families.push_back(family_from(f.get<std::string>()));
  }
  if (j.contains("learners")) {
    for (const auto& e : j.at("learners")) {
      LearnerEntry entry;
      entry.spec = LearnerSpec::from_json(e);
      if (e.contains("residual")) entry.residual = LearnerSpec::from_json(e.at("residual"));
      cfg.learners.push_back(std::move(entry));
    }
  } else {
    LearnerEntry entry;
    entry.spec.kind = LearnerKind::tree;
    cfg.learners.push_back(std::move(entry));
  }
  if (j.contains("ctrl")) {
    const auto& c = j.at("ctrl");
    cfg.ctrl_search.iters = c.value("iters", cfg.ctrl_search.iters);
    cfg.ctrl_search.candidate_count = c.value("candidate_count", cfg.ctrl_search.candidate_count);
    cfg.ctrl_search.k_max = c.value("k_max", cfg.ctrl_search.k_max);
  }
  if (j.contains("jtt")) {
    const auto& c = j.at("jtt");
    cfg.jtt.error_fraction = c.value("error_fraction", cfg.jtt.error_fraction);
    cfg.jtt.upweight = c.value("upweight", cfg.jtt.upweight);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    cfg.metrics.rwa_q = m.value("rwa_q", cfg.metrics.rwa_q);
    if (m.contains("rwa_thresholds")) {
      cfg.metrics.rwa_thresholds = m.at("rwa_thresholds").get<std::vector<double>>();
    }
    cfg.metrics.min_count = m.value("min_count", cfg.metrics.min_count);
  }
  cfg.validate();
  return cfg;
}

Dataset RunConfig::load_dataset() const {
  if (csv_path) return load_csv(*csv_path, schema);
  return generate_synthetic(*synthetic, rng::derive(seed, "dataset")).data;
}

void run_synth(const nlohmann::json& config, const std::string& out_dir) {
  const SynthConfig synth = synth_config_of(config);
  const uint64_t seed = config.value("seed", uint64_t{0});

  OutputTracker out(out_dir);
  try {
    log_line("synth: generating dataset");
    SynthResult result = generate_synthetic(synth, rng::derive(seed, "dataset"));
    write_csv(result.data, out.path("dataset.csv"));
    write_json(out.path("dataset_truth.json"), synth_truth_to_json(synth, seed, result.truth));

    std::vector<int64_t> sizes;
    for (const auto& id : result.data.source_ids()) sizes.push_back(result.data.source_size(id));
    std::sort(sizes.begin(), sizes.end());
    auto quantile = [&](double q) {
      const size_t idx = std::min(sizes.size() - 1,
                                  static_cast<size_t>(q * static_cast<double>(sizes.size())));
      return sizes[idx];
    };
    std::cout << "rows: " << result.data.rows() << "\n"
              << "sources: " << result.data.source_count() << "\n"
              << "size quantiles (min/p25/p50/p75/max): " << sizes.front() << "/" << quantile(0.25)
              << "/" << quantile(0.5) << "/" << quantile(0.75) << "/" << sizes.back() << "\n"
              << "clusters: " << result.truth.clusters.size() << "\n";
    log_line("synth: wrote " + out.dir());
  } catch (...) {
    out.remove_written();
    throw;
  }
}

namespace {

struct ClusterArtifact {
  std::string target;
  StabilityWeights weights;
  ClusterReport report;
};

// Runs the full cluster discovery for one target.
ClusterArtifact discover_cluster(const Dataset& ds, const std::string& target,
                                 const LearnerSpec& base_spec, const LearnerSpec& resid_spec,
                                 const CtrlSearchOptions& opts, uint64_t seed) {
  const int64_t candidate_count = std::min<int64_t>(opts.candidate_count, ds.source_count());
  ClusterArtifact art;
  art.target = target;
  art.weights = stability_weights(ds, target, base_spec, resid_spec, opts.iters, candidate_count, seed);
  art.report = select_cluster(ds, target, art.weights, base_spec, resid_spec, opts.iters,
                              opts.k_max, seed);
  return art;
}

void write_cluster_artifact(OutputTracker& out, const std::string& prefix, int64_t index,
                            const ClusterArtifact& art) {
  const std::string tag = source_file_tag(index, art.target);
  write_json(out.path(prefix + "weights_" + tag + ".json"), art.weights.to_json());
  write_json(out.path(prefix + "cluster_" + tag + ".json"), art.report.to_json());
  csv::write_file(out.path(prefix + "curve_" + tag + ".csv"), {"k", "mse_mean", "mse_se"},
                  art.report.curve_rows());
}

}  // namespace

void run_benchmark(const nlohmann::json& config, const std::string& out_dir) {
  RunConfig cfg = RunConfig::from_json(config);
  parallel::set_workers(cfg.workers);

  OutputTracker out(out_dir);
  try {
    log_line("benchmark: loading dataset");
    Dataset ds = cfg.load_dataset();
    SplitPair split = stratified_split(ds, cfg.train_fraction, rng::derive(cfg.seed, "benchmark/split"));
    Dataset train = ds.subset(split.train_view);
    Dataset test = ds.subset(split.validation_view);
    const std::vector<std::string> small = small_sources(train);

    write_json(out.path("config.json"), cfg.to_json());
    write_json(out.path("split.json"), {{"train", split.train_view}, {"test", split.validation_view}});

    EvalInputs eval_in;
    eval_in.families = cfg.families;
    eval_in.small = small;
    eval_in.metrics = cfg.metrics;

    for (const auto& entry : cfg.learners) {
      const std::string kind = learner_kind_name(entry.spec.kind);
      eval_in.kinds.push_back(kind);
      const uint64_t kind_seed = rng::derive(cfg.seed, "learner", kind);
      LearnerSpec base_spec = entry.spec;
      base_spec.seed_salt = kind_seed;
      LearnerSpec resid_spec = entry.residual_spec();
      resid_spec.seed_salt = kind_seed;

      for (Family family : cfg.families) {
        log_line("benchmark: training " + model_name(family, kind));
        Predictor predictor;
        switch (family) {
          case Family::global: predictor = train_global(train, base_spec); break;
          case Family::local: predictor = train_local(train, base_spec); break;
          case Family::trl: predictor = train_trl(train, base_spec, resid_spec); break;
          case Family::rwg: predictor = train_rwg(train, base_spec); break;
          case Family::jtt: predictor = train_jtt(train, base_spec, cfg.jtt); break;
          case Family::ctrl: {
            const uint64_t search_seed = rng::derive(kind_seed, "ctrl-search");
            std::map<std::string, std::vector<std::string>> clusters;
            for (int64_t i = 0; i < train.source_count(); ++i) {
              const std::string& g = train.source_ids()[static_cast<size_t>(i)];
              ClusterArtifact art =
                  discover_cluster(train, g, base_spec, resid_spec, cfg.ctrl_search, search_seed);
              clusters[g] = art.report.cluster;
              write_cluster_artifact(out, "clusters/" + kind + "/", i, art);
            }
            predictor = train_ctrl(train, base_spec, resid_spec, clusters);
            break;
          }
        }
        write_json(out.path("models/" + model_name(family, kind) + ".json"), predictor.to_json());
        PredictionMatrix matrix = build_prediction_matrix(predictor, test);
        write_matrix_csv(out.path("matrices/" + model_name(family, kind) + ".csv"), matrix);
        eval_in.matrices.emplace(model_name(family, kind), std::move(matrix));
      }
    }

    log_line("benchmark: evaluating");
    EvalOutput eval_out = build_eval(eval_in);
    write_json(out.path("reports/eval.json"), eval_out.report);
    csv::write_file(out.path("reports/table.csv"), eval_out.table_header, eval_out.table_rows);
    csv::write_file(out.path("reports/rwa_sweep.csv"), eval_out.sweep_header, eval_out.sweep_rows);

    std::vector<std::string> family_names;
    for (Family f : cfg.families) family_names.push_back(family_name(f));
    write_json(out.path("reports/eval_meta.json"),
               {{"format_version", 1},
                {"kinds", eval_in.kinds},
                {"families", family_names},
                {"small_sources", small},
                {"metrics",
                 {{"rwa_q", cfg.metrics.rwa_q},
                  {"rwa_thresholds", cfg.metrics.rwa_thresholds},
                  {"min_count", cfg.metrics.min_count}}}});

    // The report must cover every requested cell.
    for (const auto& kind : eval_in.kinds) {
      for (Family family : cfg.families) {
        require(eval_out.report.at("cells").contains(model_name(family, kind)), errc::internal,
                "benchmark: missing report cell " + model_name(family, kind));
      }
    }
    log_line("benchmark: wrote " + out.dir());
  } catch (...) {
    out.remove_written();
    throw;
  }
}

void run_cluster(const nlohmann::json& config, const std::string& out_dir,
                 const std::optional<std::string>& target) {
  RunConfig cfg = RunConfig::from_json(config);
  parallel::set_workers(cfg.workers);

  OutputTracker out(out_dir);
  try {
    Dataset ds = cfg.load_dataset();
    const auto& entry = cfg.learners.front();
    const std::string kind = learner_kind_name(entry.spec.kind);
    const uint64_t kind_seed = rng::derive(cfg.seed, "learner", kind);
    LearnerSpec base_spec = entry.spec;
    base_spec.seed_salt = kind_seed;
    LearnerSpec resid_spec = entry.residual_spec();
    resid_spec.seed_salt = kind_seed;
    const uint64_t search_seed = rng::derive(kind_seed, "ctrl-search");

    std::vector<std::string> targets;
    if (target) {
      require(ds.has_source(*target), errc::invalid_argument,
              "cluster: unknown target source '" + *target + "'");
      targets.push_back(*target);
    } else {
      targets = ds.source_ids();
    }

    for (const auto& g : targets) {
      log_line("cluster: target '" + g + "'");
      ClusterArtifact art = discover_cluster(ds, g, base_spec, resid_spec, cfg.ctrl_search, search_seed);
      write_cluster_artifact(out, "", ds.source_pos(g), art);
      std::cout << "target " << g << ": k*=" << art.report.k_star << ", cluster size "
                << art.report.cluster.size() << "\n";
    }
    log_line("cluster: wrote " + out.dir());
  } catch (...) {
    out.remove_written();
    throw;
  }
}

void run_theory(const nlohmann::json& config, const std::string& out_dir) {
  const uint64_t seed = config.value("seed", uint64_t{0});
  if (config.contains("workers")) parallel::set_workers(config.at("workers").get<int32_t>());

  std::vector<std::pair<std::string, ShiftSimConfig>> scenarios;
  if (config.contains("scenarios")) {
    int64_t index = 0;
    for (const auto& s : config.at("scenarios")) {
      std::string name = s.value("name", "scenario" + std::to_string(index));
      scenarios.emplace_back(std::move(name), ShiftSimConfig::from_json(s));
      ++index;
    }
  } else {
    scenarios.emplace_back("scenario0", ShiftSimConfig::from_json(config));
  }
  require(!scenarios.empty(), errc::invalid_argument, "theory: no scenarios");

  OutputTracker out(out_dir);
  try {
    std::vector<std::vector<std::string>> rows;
    nlohmann::json results = nlohmann::json::array();
    auto join = [](const auto& values) {
      std::string s;
      for (size_t i = 0; i < values.size(); ++i) {
        if (i) s.push_back(';');
        s += std::to_string(values[i]);
      }
      return s;
    };
    for (size_t i = 0; i < scenarios.size(); ++i) {
      const auto& [name, sim] = scenarios[i];
      log_line("theory: running '" + name + "'");
      ExcessRiskEstimate est = simulate_excess_risk(sim, rng::derive(seed, "theory", i));
      const bool pass = std::abs(est.empirical_mean - est.theoretical_mean) <= 3.0 * est.standard_error;
      rows.push_back({name, format_int(sim.cell_count), format_int(sim.leaf_count),
                      format_int(sim.replicates), join(sim.sample_sizes), join(sim.shift_variance),
                      join(sim.cluster), format_double(est.empirical_mean),
                      format_double(est.standard_error), format_double(est.theoretical_mean),
                      format_double(est.relative_gap), pass ? "pass" : "fail"});
      results.push_back({{"name", name}, {"config", sim.to_json()}, {"estimate", est.to_json()},
                         {"pass", pass}});
      std::cout << name << ": " << (pass ? "PASS" : "FAIL")
                << " (empirical=" << format_double(est.empirical_mean)
                << ", theory=" << format_double(est.theoretical_mean)
                << ", se=" << format_double(est.standard_error)
                << ", gap=" << format_double(est.relative_gap * 100.0) << "%)\n";
    }
    csv::write_file(out.path("theory.csv"),
                    {"name", "cell_count", "leaf_count", "replicates", "sample_sizes",
                     "shift_variance", "cluster", "empirical_mean", "standard_error",
                     "theoretical_mean", "relative_gap", "pass"},
                    rows);
    write_json(out.path("theory.json"), results);
    log_line("theory: wrote " + out.dir());
  } catch (...) {
    out.remove_written();
    throw;
  }
}

void run_evaluate(const std::string& run_dir, const std::string& out_dir) {
  const nlohmann::json meta = read_json((fs::path(run_dir) / "reports" / "eval_meta.json").string());
  require(meta.value("format_version", int64_t{-1}) == 1, errc::parse,
          "evaluate: unsupported eval_meta format_version");

  EvalInputs eval_in;
  eval_in.kinds = meta.at("kinds").get<std::vector<std::string>>();
  for (const auto& f : meta.at("families")) eval_in.families.push_back(family_from(f.get<std::string>()));
  eval_in.small = meta.at("small_sources").get<std::vector<std::string>>();
  eval_in.metrics.rwa_q = meta.at("metrics").at("rwa_q").get<double>();
  eval_in.metrics.rwa_thresholds = meta.at("metrics").at("rwa_thresholds").get<std::vector<double>>();
  eval_in.metrics.min_count = meta.at("metrics").at("min_count").get<int64_t>();
  eval_in.metrics.validate();

  for (const auto& kind : eval_in.kinds) {
    for (Family family : eval_in.families) {
      const std::string name = model_name(family, kind);
      eval_in.matrices.emplace(
          name, read_matrix_csv((fs::path(run_dir) / "matrices" / (name + ".csv")).string()));
    }
  }

  OutputTracker out(out_dir);
  try {
    log_line("evaluate: re-scoring saved matrices");
    EvalOutput eval_out = build_eval(eval_in);
    write_json(out.path("eval.json"), eval_out.report);
    csv::write_file(out.path("table.csv"), eval_out.table_header, eval_out.table_rows);
    csv::write_file(out.path("rwa_sweep.csv"), eval_out.sweep_header, eval_out.sweep_rows);
    log_line("evaluate: wrote " + out.dir());
  } catch (...) {
    out.remove_written();
    throw;
  }
}

}  // namespace ctrl
