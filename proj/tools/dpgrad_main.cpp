// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic data generation, DP training runs at a
// fixed (epsilon, delta) budget, SNR/batch-size sweeps, accountant queries,
// and the memory/throughput benchmark.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "dpgrad/harness.hpp"

namespace {

using namespace dpgrad;

struct GlobalArgs {
  std::string config;
  std::string out;
  std::string mode;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig load_config(const GlobalArgs& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : parse_config_file(g.config);
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out.empty()) cfg.out = g.out;
  if (!g.mode.empty()) cfg.mode = clipping_mode_from_string(g.mode);
  return cfg;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_file(out_path, content);
}

std::vector<double> default_sweep_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(2.0, -k));
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpgrad: differentially private gradient engine"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config, "run-config file (key=value lines)");
  app.add_option("--out", g.out, "output path (stdout when omitted)");
  app.add_option("--mode", g.mode, "clipping mode: naive|layerwise|ghost|auto");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.fallthrough();

  auto* cmd_train = app.add_subcommand("train", "run DP training on the synthetic task");

  auto* cmd_sweep = app.add_subcommand("snr-sweep", "batch-size sweep at fixed update steps");
  std::vector<double> sweep_q = {0.002, 0.01, 0.05, 0.2};
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
  int sweep_threads = 1;
  cmd_sweep->add_option("--q-grid", sweep_q, "sampling rates to sweep")->delimiter(',');
  cmd_sweep->add_option("--seeds", sweep_seeds, "seeds per grid point")->delimiter(',');
  cmd_sweep->add_option("--threads", sweep_threads, "worker threads");

  auto* cmd_bench = app.add_subcommand("bench", "memory/throughput benchmark of the clipping strategies");
  BenchConfig bench;
  cmd_bench->add_option("--vocab", bench.vocab, "vocabulary size");
  cmd_bench->add_option("--embed-dim", bench.embed_dim, "embedding dimension");
  cmd_bench->add_option("--hidden-dim", bench.hidden_dim, "hidden width");
  cmd_bench->add_option("--hidden-layers", bench.hidden_layers, "hidden layer count");
  cmd_bench->add_option("--classes", bench.classes, "number of classes");
  cmd_bench->add_option("--t", bench.t, "sequence length");
  cmd_bench->add_option("--budget", bench.float_budget, "live 64-bit-real budget");
  cmd_bench->add_option("--timing-steps", bench.timing_steps, "timed update count");

  auto* cmd_acc = app.add_subcommand("accountant", "privacy accountant queries");
  cmd_acc->require_subcommand(1);
  double a_sigma = 1.0, a_q = 1.0, a_eps = 3.0, a_delta = 1e-5;
  long a_steps = 1, a_n = 50000, a_epochs = 50;
  bool a_csv = false;
  std::vector<double> a_grid;

  auto* acc_eps = cmd_acc->add_subcommand("epsilon", "epsilon spent by (sigma, q, steps, delta)");
  acc_eps->add_option("--sigma", a_sigma)->required();
  acc_eps->add_option("--q", a_q)->required();
  acc_eps->add_option("--steps", a_steps)->required();
  acc_eps->add_option("--delta", a_delta)->required();
  acc_eps->add_flag("--csv", a_csv, "CSV instead of aligned text");

  auto* acc_sigma = cmd_acc->add_subcommand("sigma", "noise multiplier for a (epsilon, delta) budget");
  acc_sigma->add_option("--epsilon", a_eps)->required();
  acc_sigma->add_option("--delta", a_delta)->required();
  acc_sigma->add_option("--q", a_q)->required();
  acc_sigma->add_option("--steps", a_steps)->required();
  acc_sigma->add_flag("--csv", a_csv, "CSV instead of aligned text");

  auto* acc_sweep = cmd_acc->add_subcommand("sweep", "sigma vs c*sqrt(q) over a sampling-rate grid");
  acc_sweep->add_option("--n", a_n, "dataset size");
  acc_sweep->add_option("--epochs", a_epochs);
  acc_sweep->add_option("--epsilon", a_eps);
  acc_sweep->add_option("--delta", a_delta);
  acc_sweep->add_option("--q-grid", a_grid, "rates (default: 2^0 .. 2^-12)")->delimiter(',');

  auto* cmd_gen = app.add_subcommand("gen-data", "emit the synthetic dataset as CSV");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (cmd_train->parsed()) {
      const RunConfig cfg = load_config(g);
      const TrainResult result = train(cfg);
      emit(cfg.out, result.csv);
    } else if (cmd_sweep->parsed()) {
      const RunConfig cfg = load_config(g);
      const SnrSweepResult result = snr_sweep(cfg, sweep_q, sweep_seeds, sweep_threads);
      emit(cfg.out, result.csv);
    } else if (cmd_bench->parsed()) {
      if (g.seed_set) bench.seed = g.seed;
      const BenchResult result = run_bench(bench);
      emit(g.out, result.csv);
    } else if (acc_eps->parsed()) {
      emit(g.out, accountant_epsilon_report(a_sigma, a_q, a_steps, a_delta, a_csv || !g.out.empty()));
    } else if (acc_sigma->parsed()) {
      emit(g.out, accountant_sigma_report(a_eps, a_delta, a_q, a_steps, a_csv || !g.out.empty()));
    } else if (acc_sweep->parsed()) {
      const std::vector<double> grid = a_grid.empty() ? default_sweep_grid() : a_grid;
      emit(g.out, accountant_sweep_report(a_n, a_epochs, a_eps, a_delta, grid, /*csv=*/!g.out.empty()));
    } else if (cmd_gen->parsed()) {
      const RunConfig cfg = load_config(g);
      const SynthTask task =
          gen_synthetic_task(cfg.seed, cfg.n, cfg.t, cfg.vocab, cfg.classes, cfg.embed_dim, cfg.label_noise);
      emit(cfg.out, dataset_csv(task, cfg));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
