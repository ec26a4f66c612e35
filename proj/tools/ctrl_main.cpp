// ctrl_main.cpp — command-line harness over the ctrl shared library.
//
// Subcommands: synth, benchmark, cluster, theory, evaluate. Each reads one
// JSON config (--config), writes an output directory (--out), and is
// deterministic in (config, seed).
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <ctrl/ctrl.h>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<int32_t> workers;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* config = cmd->add_option("--config", args.config_path, "JSON config file");
  if (needs_config) config->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--workers", args.workers, "worker threads (0 = hardware default)");
}

// Reads the config file and applies command-line overrides.
std::string load_config(const CommonArgs& args) {
  std::ifstream in(args.config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open config " << args.config_path << "\n";
    std::exit(1);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid JSON in " << args.config_path << ": " << e.what() << "\n";
    std::exit(1);
  }
  if (args.seed) j["seed"] = *args.seed;
  if (args.workers) j["workers"] = *args.workers;
  return j.dump();
}

int finish(ctrl_status status) {
  if (status == CTRL_OK) return 0;
  std::cerr << "error: " << ctrl_last_error() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clustered transfer residual learning toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-source dataset");
  add_common(synth, synth_args);

  CommonArgs bench_args;
  auto* bench = app.add_subcommand("benchmark", "train and evaluate all configured model families");
  add_common(bench, bench_args);

  CommonArgs cluster_args;
  std::string cluster_target;
  auto* cluster = app.add_subcommand("cluster", "stability weights and cluster report per target");
  add_common(cluster, cluster_args);
  cluster->add_option("--target", cluster_target, "target source id (default: all sources)");

  CommonArgs theory_args;
  auto* theory = app.add_subcommand("theory", "Monte Carlo check of the excess-risk formula");
  add_common(theory, theory_args);

  std::string eval_run;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "re-score saved prediction matrices");
  evaluate->add_option("--run", eval_run, "benchmark run directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", eval_out, "output directory (default: <run>/reports)");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    return finish(ctrl_run_synth(load_config(synth_args).c_str(), synth_args.out_dir.c_str()));
  }
  if (bench->parsed()) {
    return finish(ctrl_run_benchmark(load_config(bench_args).c_str(), bench_args.out_dir.c_str()));
  }
  if (cluster->parsed()) {
    return finish(ctrl_run_cluster(load_config(cluster_args).c_str(), cluster_args.out_dir.c_str(),
                                   cluster_target.empty() ? nullptr : cluster_target.c_str()));
  }
  if (theory->parsed()) {
    return finish(ctrl_run_theory(load_config(theory_args).c_str(), theory_args.out_dir.c_str()));
  }
  if (evaluate->parsed()) {
    if (eval_out.empty()) eval_out = eval_run + "/reports";
    return finish(ctrl_run_evaluate(eval_run.c_str(), eval_out.c_str()));
  }
  return 1;
}
