// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpgrad/accountant.hpp"
#include "dpgrad/optimizer.hpp"
#include "dpgrad/synth.hpp"

namespace dpgrad {

/// One training run, parsed from a flat key=value config file (# comments).
/// Exactly one of `batch` / `q` must be set; epsilon "inf" disables privacy
/// (sigma = 0, no clipping); delta "auto" resolves to 1/(2n).
struct RunConfig {
  // task
  Index n = 10000;
  Index t = 8;
  Index vocab = 100;
  Index classes = 4;
  Index embed_dim = 16;
  Index hidden_dim = 16;
  Index hidden_layers = 1;
  double label_noise = 0.0;
  // privacy
  double epsilon = 3.0;
  std::optional<double> delta;  // empty = auto
  double clip = 0.1;
  // optimizer
  std::string algo = "adam";
  double eta = 1e-3;
  std::optional<Index> batch;
  std::optional<double> q;
  long epochs = 10;
  std::optional<long> steps;  // fixed-update-steps regime; overrides epochs*ceil(n/B)
  double loss_scale = 1.0;
  // clipping + run
  ClippingMode mode = ClippingMode::Ghost;
  std::uint64_t seed = 42;
  std::string out;

  bool non_private() const { return std::isinf(epsilon); }

  /// Sets one key; throws ConfigError (prefixed with `where`) on bad input.
  void set(const std::string& key, const std::string& value, const std::string& where);
  /// Every key in file order, for provenance headers.
  std::vector<std::pair<std::string, std::string>> items() const;
};

RunConfig parse_config_file(const std::string& path);

/// Derived quantities of a run: exact rate, denominator, schedule, noise.
struct ResolvedPlan {
  Index batch = 1;
  double q = 1.0;
  long steps = 1;
  double delta = 1e-5;
  double sigma = 0.0;
  double sigma_eff = 0.0;
  double clip = 0.1;
};

ResolvedPlan resolve_plan(const RunConfig& cfg);

struct StepRecord {
  long step;
  Index realized_batch;
  double loss;
  double signal_norm;
  double noise_norm;
  double snr;
};

struct TrainResult {
  ResolvedPlan plan;
  std::vector<StepRecord> records;
  double rbar = 0;  // mean snr over the first min(30, S) updates
  double final_loss = 0;
  double final_accuracy = 0;
  double realized_epsilon = 0;
  Tensor final_params;
  std::string csv;
};

TrainResult train(const RunConfig& cfg);

struct SweepRow {
  bool median = false;
  double q = 0;
  std::uint64_t seed = 0;
  double sigma = 0, sigma_eff = 0, rbar = 0, final_loss = 0, final_accuracy = 0;
};

struct SnrSweepResult {
  std::vector<SweepRow> rows;  // per-seed rows in grid order, then medians per q
  std::string csv;
};

/// Re-solves sigma per q at fixed step count and runs one training per
/// (q, seed); grid points may run in parallel worker threads and results are
/// merged in grid order.
SnrSweepResult snr_sweep(const RunConfig& base, std::span<const double> q_grid,
                         std::span<const std::uint64_t> seeds, int threads = 1);

struct BenchConfig {
  Index vocab = 8192;
  Index embed_dim = 64;
  Index hidden_dim = 64;
  Index hidden_layers = 1;
  Index classes = 4;
  Index t = 128;
  double float_budget = 4e6;  // live 64-bit reals
  double clip = 0.1;
  std::uint64_t seed = 42;
  Index timing_steps = 3;
  Index max_batch_cap = 1 << 20;
};

struct BenchRow {
  std::string mode;  // "nonprivate" or a clipping mode
  Index max_batch = 0;
  double ledger_peak = 0;
  double instrumented_peak = 0;
  double examples_per_sec = 0;
  double rel_throughput = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  Index common_batch = 0;
  MemLedger ledger_at_common;  // ghost-mode ledger at the common batch, for reporting
  std::string csv;
};

/// Binary-searches the max feasible batch per strategy under the instrumented
/// allocation budget, then times all strategies at a common batch size.
BenchResult run_bench(const BenchConfig& cfg);

// Accountant subcommand backends; aligned text by default, CSV when asked.
std::string accountant_epsilon_report(double sigma, double q, long steps, double delta, bool csv);
std::string accountant_sigma_report(double epsilon, double delta, double q, long steps, bool csv);
std::string accountant_sweep_report(long n, long epochs, double epsilon, double delta,
                                    std::span<const double> q_grid, bool csv);

std::string dataset_csv(const SynthTask& task, const RunConfig& cfg);

void write_file(const std::string& path, const std::string& content);

}  // namespace dpgrad
