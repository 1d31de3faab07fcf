// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dpgrad/alloc_meter.hpp"
#include "dpgrad/harness.hpp"
#include "oracles.hpp"

using namespace dpgrad;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.n = 400;
  cfg.t = 4;
  cfg.vocab = 30;
  cfg.classes = 3;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.hidden_layers = 1;
  cfg.epsilon = 3.0;
  cfg.q = 0.1;
  cfg.epochs = 1;
  cfg.steps = 15;
  cfg.eta = 0.02;
  cfg.seed = 7;
  return cfg;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content) : path("/tmp/dpgrad_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("synthetic task: planted model is perfect at zero label noise") {
  const SynthTask task = gen_synthetic_task(123, 2000, 6, 50, 4, 16);
  CHECK(task.planted_accuracy == 1.0);
  CHECK(task.data.batch() == 2000);
  CHECK(task.data.steps() == 6);
  const SynthTask noisy = gen_synthetic_task(123, 2000, 6, 50, 4, 16, 0.3);
  CHECK(noisy.planted_accuracy < 1.0);
  CHECK(noisy.planted_accuracy > 0.6);
}

TEST_CASE("synthetic task: label histogram is approximately uniform") {
  const Index K = 4, N = 3000;
  const SynthTask task = gen_synthetic_task(2026, N, 8, 100, K, 16);
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  for (Index i = 0; i < N; ++i) counts[static_cast<std::size_t>(task.data.labels(i))] += 1.0;
  const double expected = static_cast<double>(N) / static_cast<double>(K);
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < oracles::chi2_99(static_cast<int>(K) - 1));  // p > 0.01
}

TEST_CASE("synthetic task: same seed, byte-identical dataset") {
  const SynthTask a = gen_synthetic_task(9, 300, 5, 40, 4, 8);
  const SynthTask b = gen_synthetic_task(9, 300, 5, 40, 4, 8);
  CHECK((a.data.token_ids - b.data.token_ids).cwiseAbs().maxCoeff() == 0);
  CHECK((a.data.labels - b.data.labels).cwiseAbs().maxCoeff() == 0);
  const SynthTask c = gen_synthetic_task(10, 300, 5, 40, 4, 8);
  CHECK((a.data.token_ids - c.data.token_ids).cwiseAbs().maxCoeff() > 0);
  CHECK_THROWS_AS(gen_synthetic_task(1, 10, 4, 3, 5, 8), ValueError);  // classes > vocab
}

TEST_CASE("config parsing: happy path and precise errors") {
  const TempFile good("good.cfg",
                      "# comment\n"
                      "n=500\n"
                      "t = 6\n"
                      "epsilon=inf\n"
                      "delta=auto\n"
                      "q=0.05\n"
                      "mode=layerwise  # trailing comment\n"
                      "seed=99\n");
  const RunConfig cfg = parse_config_file(good.path);
  CHECK(cfg.n == 500);
  CHECK(cfg.t == 6);
  CHECK(cfg.non_private());
  CHECK_FALSE(cfg.delta.has_value());
  CHECK(cfg.q == doctest::Approx(0.05));
  CHECK(cfg.mode == ClippingMode::Layerwise);
  CHECK(cfg.seed == 99);

  const TempFile bad_key("badkey.cfg", "n=10\nbatchh=4\n");
  CHECK_THROWS_WITH_AS(parse_config_file(bad_key.path), doctest::Contains("badkey.cfg:2"), ConfigError);

  const TempFile bad_val("badval.cfg", "\n\nepsilon=three\n");
  CHECK_THROWS_WITH_AS(parse_config_file(bad_val.path), doctest::Contains("badval.cfg:3"), ConfigError);

  const TempFile no_eq("noeq.cfg", "epsilon 3\n");
  CHECK_THROWS_AS(parse_config_file(no_eq.path), ConfigError);
}

TEST_CASE("resolve_plan: exactly one of batch and q") {
  RunConfig cfg = tiny_config();
  cfg.batch = 40;  // both set now
  CHECK_THROWS_AS(resolve_plan(cfg), ConfigError);
  cfg.q.reset();
  const ResolvedPlan plan = resolve_plan(cfg);
  CHECK(plan.batch == 40);
  CHECK(plan.q == doctest::Approx(0.1));
  CHECK(plan.steps == 15);
  CHECK(plan.delta == doctest::Approx(1.0 / 800.0));
  RunConfig neither = tiny_config();
  neither.q.reset();
  CHECK_THROWS_AS(resolve_plan(neither), ConfigError);
}

TEST_CASE("train: footer epsilon never exceeds the configured budget") {
  const RunConfig cfg = tiny_config();
  const TrainResult r = train(cfg);
  CHECK(r.realized_epsilon <= cfg.epsilon);
  CHECK(r.realized_epsilon >= cfg.epsilon - 0.01);
  CHECK(r.records.size() == 15);
  CHECK(std::isfinite(r.final_loss));
  CHECK(r.csv.find("# realized_epsilon=") != std::string::npos);
  CHECK(r.csv.rfind("# dpgrad train\n", 0) == 0);
  CHECK(r.csv.find("step,realized_batch,loss,signal_norm,noise_norm,snr\n") != std::string::npos);
}

TEST_CASE("train: rbar averages the first min(30, S) updates") {
  RunConfig cfg = tiny_config();
  cfg.steps = 12;
  const TrainResult r = train(cfg);
  double acc = 0;
  for (const auto& rec : r.records) acc += rec.snr;
  CHECK(r.rbar == doctest::Approx(acc / 12.0).epsilon(1e-12));
}

TEST_CASE("train: a looser budget reaches a lower final loss at the same schedule") {
  RunConfig tight = tiny_config();
  tight.steps = 60;
  tight.epsilon = 1.0;
  RunConfig loose = tight;
  loose.epsilon = 8.0;
  const TrainResult r_tight = train(tight);
  const TrainResult r_loose = train(loose);
  CHECK(r_loose.final_loss < r_tight.final_loss);
}

TEST_CASE("train: identical config and seed give byte-identical CSV") {
  const RunConfig cfg = tiny_config();
  const TrainResult a = train(cfg);
  const TrainResult b = train(cfg);
  CHECK(a.csv == b.csv);
  RunConfig other = cfg;
  other.seed = 8;
  const TrainResult c = train(other);
  CHECK(a.csv != c.csv);
}

TEST_CASE("train: non-private sentinel matches a plain training loop") {
  RunConfig cfg = tiny_config();
  cfg.epsilon = std::numeric_limits<double>::infinity();
  const TrainResult dp = train(cfg);
  CHECK(std::isinf(dp.realized_epsilon));

  // Plain loop: same streams, gradients summed over the Poisson batch and
  // divided by the fixed denominator, no clipping machinery at all.
  const SynthTask task = gen_synthetic_task(cfg.seed, cfg.n, cfg.t, cfg.vocab, cfg.classes, cfg.embed_dim);
  SeededRng root(cfg.seed);
  SeededRng init_rng = root.fork(1);
  SeededRng sampling_rng = root.fork(2);
  SeededRng noise_rng = root.fork(3);
  ModelSpec model = ModelSpec::make(InputEncoding::Embedding, cfg.vocab, cfg.embed_dim, {cfg.hidden_dim},
                                    cfg.classes, true, init_rng);
  const ResolvedPlan plan = resolve_plan(cfg);
  Tensor params = model.params_flat();
  AdamState st = AdamState::init(params.size());
  for (long step = 0; step < plan.steps; ++step) {
    const auto idx = poisson_sample(cfg.n, plan.q, sampling_rng);
    Tensor gbar({params.size()});
    Tensor noise = gaussian_noise({params.size()}, 0.0, noise_rng);  // keep streams aligned
    if (!idx.empty()) {
      const SeqBatch sub = gather(task.data, idx);
      const Forward f = forward(model, sub);
      const Tensor grad = backward_aggregate(model, f, Vector::Ones(sub.batch()));
      gbar.vec() = grad.vec() / static_cast<double>(plan.batch);
    }
    dp_adam_step(st, params, gbar, cfg.eta);
    model.set_params_flat(params);
  }
  CHECK(oracles::vec_rel_err(dp.final_params, params) < 1e-9);
  double loss = 0, acc = 0;
  (void)loss;
  (void)acc;
  for (std::size_t i = 0; i < dp.records.size(); ++i) CHECK(std::isinf(dp.records[i].snr));
}

TEST_CASE("snr sweep: sigma_eff is nonincreasing in q (smoke)") {
  RunConfig cfg = tiny_config();
  cfg.steps = 10;
  const std::vector<double> grid = {0.05, 0.2};
  const std::vector<std::uint64_t> seeds = {1, 2};
  const SnrSweepResult sweep = snr_sweep(cfg, grid, seeds, 2);
  REQUIRE(sweep.rows.size() == 6);  // 4 runs + 2 medians
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& row : sweep.rows) {
    if (!row.median) continue;
    CHECK(row.sigma_eff <= prev);
    prev = row.sigma_eff;
  }
  CHECK(sweep.csv.find("kind,q,seed,sigma,sigma_eff,rbar,final_loss,final_accuracy\n") != std::string::npos);

  // determinism with parallel workers
  const SnrSweepResult again = snr_sweep(cfg, grid, seeds, 1);
  CHECK(sweep.csv == again.csv);
}

TEST_CASE("bench: max-batch ordering on a small embedding-heavy config") {
  BenchConfig cfg;
  cfg.vocab = 512;
  cfg.embed_dim = 16;
  cfg.hidden_dim = 16;
  cfg.hidden_layers = 1;
  cfg.classes = 3;
  cfg.t = 12;
  cfg.float_budget = 300000;
  cfg.timing_steps = 1;
  const BenchResult r = run_bench(cfg);
  REQUIRE(r.rows.size() == 5);
  Index naive = 0, layerwise = 0, ghost = 0, nonprivate = 0;
  for (const auto& row : r.rows) {
    if (row.mode == "naive") naive = row.max_batch;
    if (row.mode == "layerwise") layerwise = row.max_batch;
    if (row.mode == "ghost") ghost = row.max_batch;
    if (row.mode == "nonprivate") nonprivate = row.max_batch;
    CHECK(row.instrumented_peak <= cfg.float_budget);
    CHECK(row.max_batch >= 1);
  }
  CHECK(ghost >= layerwise);
  CHECK(layerwise >= naive);
  CHECK(nonprivate >= ghost);
  CHECK(r.common_batch >= 1);
}

TEST_CASE("ghost peak is within 10% of non-private training on a parameter-dominated config") {
  // T=100-style sequences on an embedding-dominated model: the table and the
  // flat gradient dwarf the 2T^2 ghost transient and the recorded tape.
  SeededRng init(777);
  const ModelSpec model = ModelSpec::make(InputEncoding::Embedding, 8192, 64, {64}, 4, true, init);
  SeededRng rng(778);
  SeqBatch batch;
  const Index B = 2, T = 100;
  batch.token_ids = IntMatrix(B, T);
  batch.labels = IntVector(B);
  for (Index i = 0; i < B; ++i) {
    for (Index t = 0; t < T; ++t) batch.token_ids(i, t) = static_cast<std::int32_t>(rng.uniform_index(8192));
    batch.labels(i) = static_cast<std::int32_t>(rng.uniform_index(4));
  }

  double nonprivate_peak = 0, ghost_peak = 0;
  {
    MeterScope scope;
    const Forward f = forward(model, batch);
    const Tensor grad = backward_aggregate(model, f, Vector::Ones(B));
    nonprivate_peak = static_cast<double>(scope.peak());
  }
  {
    MeterScope scope;
    Forward f = forward(model, batch);
    const LayerTape tape = backward_tape(model, std::move(f));
    const Tensor sum = clipped_grad_sum(model, tape, 0.1, ClippingMode::Ghost);
    ghost_peak = static_cast<double>(scope.peak());
  }
  CHECK(ghost_peak <= 1.10 * nonprivate_peak);
  // and the analytic ledger predicts the same relationship
  CHECK(mem_cost(model, B, T, ClippingMode::Ghost).peak_total <= 1.10 * mem_cost_nonprivate(model, B, T));
}

TEST_CASE("bench: budget too small for a single example") {
  BenchConfig cfg;
  cfg.vocab = 512;
  cfg.embed_dim = 32;
  cfg.float_budget = 100;  // smaller than one model copy
  CHECK_THROWS_AS(run_bench(cfg), InfeasibleError);
}

TEST_CASE("accountant reports") {
  const std::string eps_text = accountant_epsilon_report(1.0, 1.0, 1, 1e-5, false);
  CHECK(eps_text.find("5.30258") != std::string::npos);
  const std::string eps_csv = accountant_epsilon_report(1.0, 1.0, 1, 1e-5, true);
  CHECK(eps_csv.rfind("sigma,q,steps,delta,epsilon_rdp,order,epsilon_gdp_clt\n", 0) == 0);

  const std::string sigma_csv = accountant_sigma_report(8.0, 1.19e-5, 0.02435, 410, true);
  CHECK(sigma_csv.find("0.75084") != std::string::npos);

  const std::vector<double> grid = {1.0, 0.5};
  const std::string sweep_csv = accountant_sweep_report(50000, 50, 3.0, 1e-5, grid, true);
  CHECK(sweep_csv.find("q,batch,steps,sigma,sigma_eff,fitted_c_sqrt_q,relative_residual\n") != std::string::npos);
}

TEST_CASE("gen-data CSV is deterministic and carries provenance") {
  RunConfig cfg = tiny_config();
  cfg.n = 50;
  const SynthTask task = gen_synthetic_task(cfg.seed, cfg.n, cfg.t, cfg.vocab, cfg.classes, cfg.embed_dim);
  const std::string a = dataset_csv(task, cfg);
  const SynthTask task2 = gen_synthetic_task(cfg.seed, cfg.n, cfg.t, cfg.vocab, cfg.classes, cfg.embed_dim);
  const std::string b = dataset_csv(task2, cfg);
  CHECK(a == b);
  CHECK(a.find("# planted_accuracy=1\n") != std::string::npos);
  CHECK(a.find("tok_0,tok_1,tok_2,tok_3,label\n") != std::string::npos);
}
