// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dpgrad/alloc_meter.hpp"

namespace dpgrad {
namespace {

double parse_double(const std::string& value, const std::string& where, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": value for '" + key + "' is not a number: '" + value + "'");
  }
}

long parse_long(const std::string& value, const std::string& where, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": value for '" + key + "' is not an integer: '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& where, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": value for '" + key + "' is not an unsigned integer: '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  if (key == "n") n = parse_long(value, where, key);
  else if (key == "t") t = parse_long(value, where, key);
  else if (key == "vocab") vocab = parse_long(value, where, key);
  else if (key == "classes") classes = parse_long(value, where, key);
  else if (key == "embed_dim") embed_dim = parse_long(value, where, key);
  else if (key == "hidden_dim") hidden_dim = parse_long(value, where, key);
  else if (key == "hidden_layers") hidden_layers = parse_long(value, where, key);
  else if (key == "label_noise") label_noise = parse_double(value, where, key);
  else if (key == "epsilon") epsilon = (value == "inf") ? kInf : parse_double(value, where, key);
  else if (key == "delta") {
    if (value == "auto") delta.reset();
    else delta = parse_double(value, where, key);
  } else if (key == "clip") clip = (value == "inf") ? kInf : parse_double(value, where, key);
  else if (key == "algo") {
    if (value != "sgd" && value != "adam") throw ConfigError(where + ": algo must be 'sgd' or 'adam', got '" + value + "'");
    algo = value;
  } else if (key == "batch") batch = parse_long(value, where, key);
  else if (key == "q") q = parse_double(value, where, key);
  else if (key == "eta") eta = parse_double(value, where, key);
  else if (key == "epochs") epochs = parse_long(value, where, key);
  else if (key == "steps") steps = parse_long(value, where, key);
  else if (key == "loss_scale") loss_scale = parse_double(value, where, key);
  else if (key == "mode") {
    try {
      mode = clipping_mode_from_string(value);
    } catch (const ValueError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  } else if (key == "seed") seed = parse_u64(value, where, key);
  else if (key == "out") out = value;
  else throw ConfigError(where + ": unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("n", std::to_string(n));
  kv.emplace_back("t", std::to_string(t));
  kv.emplace_back("vocab", std::to_string(vocab));
  kv.emplace_back("classes", std::to_string(classes));
  kv.emplace_back("embed_dim", std::to_string(embed_dim));
  kv.emplace_back("hidden_dim", std::to_string(hidden_dim));
  kv.emplace_back("hidden_layers", std::to_string(hidden_layers));
  kv.emplace_back("label_noise", fmt9(label_noise));
  kv.emplace_back("epsilon", fmt9(epsilon));
  kv.emplace_back("delta", delta ? fmt9(*delta) : "auto");
  kv.emplace_back("clip", fmt9(clip));
  kv.emplace_back("algo", algo);
  kv.emplace_back("eta", fmt9(eta));
  if (batch) kv.emplace_back("batch", std::to_string(*batch));
  if (q) kv.emplace_back("q", fmt9(*q));
  kv.emplace_back("epochs", std::to_string(epochs));
  if (steps) kv.emplace_back("steps", std::to_string(*steps));
  kv.emplace_back("loss_scale", fmt9(loss_scale));
  kv.emplace_back("mode", to_string(mode));
  kv.emplace_back("seed", std::to_string(seed));
  if (!out.empty()) kv.emplace_back("out", out);
  return kv;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string body = line;
    const auto hash = body.find('#');
    if (hash != std::string::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    cfg.set(key, value, where);
  }
  return cfg;
}

ResolvedPlan resolve_plan(const RunConfig& cfg) {
  if (cfg.batch.has_value() == cfg.q.has_value())
    throw ConfigError("config: exactly one of 'batch' or 'q' must be given");
  ResolvedPlan plan;
  if (cfg.batch) {
    plan.batch = *cfg.batch;
  } else {
    if (*cfg.q <= 0 || *cfg.q > 1) throw ConfigError("config: q must lie in (0, 1]");
    plan.batch = std::max<Index>(1, static_cast<Index>(std::llround(*cfg.q * static_cast<double>(cfg.n))));
  }
  if (plan.batch <= 0 || plan.batch > cfg.n) throw ConfigError("config: batch must lie in [1, n]");
  plan.q = static_cast<double>(plan.batch) / static_cast<double>(cfg.n);
  plan.steps = cfg.steps ? *cfg.steps : cfg.epochs * ((cfg.n + plan.batch - 1) / plan.batch);
  if (plan.steps <= 0) throw ConfigError("config: step count must be positive");
  plan.delta = cfg.delta ? *cfg.delta : 1.0 / (2.0 * static_cast<double>(cfg.n));

  if (cfg.non_private()) {
    plan.sigma = 0.0;
    plan.clip = kInf;
    plan.sigma_eff = 0.0;
  } else {
    plan.clip = cfg.clip;
    const SigmaSolveResult solved = solve_sigma({cfg.epsilon, plan.delta}, {plan.q, plan.steps});
    plan.sigma = solved.sigma;
    plan.sigma_eff = effective_noise_multiplier(plan.sigma, plan.q);
  }
  return plan;
}

namespace {

void eval_full(const ModelSpec& model, const SeqBatch& data, double* loss, double* accuracy) {
  const Index n = data.batch();
  const Index chunk = 4096;
  double loss_sum = 0;
  Index hits = 0;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    std::vector<Index> idx(static_cast<std::size_t>(len));
    for (Index i = 0; i < len; ++i) idx[static_cast<std::size_t>(i)] = start + i;
    const SeqBatch part = gather(data, idx);
    const Forward f = forward(model, part);
    loss_sum += f.losses.sum();
    for (Index i = 0; i < len; ++i) {
      Index best = 0;
      f.probs.mat().row(i).maxCoeff(&best);
      hits += (best == part.labels(i));
    }
  }
  *loss = loss_sum / static_cast<double>(n);
  *accuracy = static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
  const ResolvedPlan plan = resolve_plan(cfg);
  const SynthTask task =
      gen_synthetic_task(cfg.seed, cfg.n, cfg.t, cfg.vocab, cfg.classes, cfg.embed_dim, cfg.label_noise);

  SeededRng root(cfg.seed);
  SeededRng init_rng = root.fork(1);
  SeededRng sampling_rng = root.fork(2);
  SeededRng noise_rng = root.fork(3);

  std::vector<Index> hidden_dims(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden_dim);
  ModelSpec model = ModelSpec::make(InputEncoding::Embedding, cfg.vocab, cfg.embed_dim, hidden_dims, cfg.classes,
                                    /*bias=*/true, init_rng);

  const Index P = model.param_count();
  Tensor params = model.params_flat();
  AdamState adam = AdamState::init(P);
  const NoiseSpec spec{plan.clip, plan.sigma, plan.batch};
  const LossScale scale{cfg.loss_scale};

  TrainResult result;
  result.plan = plan;
  result.records.reserve(static_cast<std::size_t>(plan.steps));

  for (long step = 0; step < plan.steps; ++step) {
    const std::vector<Index> idx = poisson_sample(cfg.n, plan.q, sampling_rng);
    PrivatizedParts parts;
    if (idx.empty()) {
      Tensor zero({P});
      parts = privatize_parts(zero, spec, noise_rng);
    } else {
      const SeqBatch sub = gather(task.data, idx);
      parts = scaled_privatized_step(model, sub, spec, scale, cfg.mode, noise_rng);
    }
    if (cfg.algo == "adam")
      dp_adam_step(adam, params, parts.gbar, cfg.eta);
    else
      dp_sgd_step(params, parts.gbar, cfg.eta);
    model.set_params_flat(params);

    StepRecord rec;
    rec.step = step;
    rec.realized_batch = static_cast<Index>(idx.size());
    rec.loss = parts.mean_loss;
    rec.signal_norm = parts.signal_norm;
    rec.noise_norm = parts.noise_norm;
    rec.snr = signal_to_noise(parts.signal_norm, parts.noise_norm);
    result.records.push_back(rec);
  }

  const long head = std::min<long>(30, plan.steps);
  double acc = 0;
  for (long i = 0; i < head; ++i) acc += result.records[static_cast<std::size_t>(i)].snr;
  result.rbar = acc / static_cast<double>(head);

  eval_full(model, task.data, &result.final_loss, &result.final_accuracy);
  result.realized_epsilon =
      plan.sigma > 0 ? rdp_to_dp(rdp_curve(plan.sigma, plan.q), plan.steps, plan.delta).epsilon : kInf;
  result.final_params = std::move(params);

  std::string csv;
  csv += "# dpgrad train\n";
  for (const auto& [k, v] : cfg.items()) csv += "# " + k + "=" + v + "\n";
  csv += "# derived_batch=" + std::to_string(plan.batch) + "\n";
  csv += "# derived_q=" + fmt9(plan.q) + "\n";
  csv += "# derived_steps=" + std::to_string(plan.steps) + "\n";
  csv += "# derived_delta=" + fmt9(plan.delta) + "\n";
  csv += "# derived_sigma=" + fmt9(plan.sigma) + "\n";
  csv += "# derived_sigma_eff=" + fmt9(plan.sigma_eff) + "\n";
  csv += "step,realized_batch,loss,signal_norm,noise_norm,snr\n";
  for (const auto& r : result.records)
    csv += std::to_string(r.step) + "," + std::to_string(r.realized_batch) + "," + fmt9(r.loss) + "," +
           fmt9(r.signal_norm) + "," + fmt9(r.noise_norm) + "," + fmt9(r.snr) + "\n";
  csv += "# rbar_first30=" + fmt9(result.rbar) + "\n";
  csv += "# final_loss=" + fmt9(result.final_loss) + "\n";
  csv += "# final_accuracy=" + fmt9(result.final_accuracy) + "\n";
  csv += "# realized_epsilon=" + fmt9(result.realized_epsilon) + "\n";
  result.csv = std::move(csv);
  return result;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SnrSweepResult snr_sweep(const RunConfig& base, std::span<const double> q_grid,
                         std::span<const std::uint64_t> seeds, int threads) {
  if (q_grid.empty() || seeds.empty()) throw ValueError("snr_sweep: empty grid");
  // Fixed-update-steps regime: the same S for every grid point.
  const long fixed_steps = base.steps ? *base.steps : resolve_plan(base).steps;

  struct Point {
    double q;
    std::uint64_t seed;
  };
  std::vector<Point> points;
  for (double q : q_grid)
    for (std::uint64_t s : seeds) points.push_back({q, s});

  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        RunConfig cfg = base;
        cfg.q = points[i].q;
        cfg.batch.reset();
        cfg.steps = fixed_steps;
        cfg.seed = points[i].seed;
        cfg.out.clear();
        const TrainResult r = train(cfg);
        rows[i] = {false,        points[i].q, points[i].seed, r.plan.sigma,
                   r.plan.sigma_eff, r.rbar,  r.final_loss,   r.final_accuracy};
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int pool = std::max(1, std::min<int>(threads, static_cast<int>(points.size())));
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    for (int i = 0; i < pool; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SnrSweepResult result;
  result.rows = rows;
  for (double q : q_grid) {
    std::vector<double> rbars, losses, accs;
    double sigma = 0, sigma_eff = 0;
    for (const auto& r : rows)
      if (r.q == q) {
        rbars.push_back(r.rbar);
        losses.push_back(r.final_loss);
        accs.push_back(r.final_accuracy);
        sigma = r.sigma;
        sigma_eff = r.sigma_eff;
      }
    result.rows.push_back({true, q, 0, sigma, sigma_eff, median(rbars), median(losses), median(accs)});
  }

  std::string csv;
  csv += "# dpgrad snr-sweep\n";
  for (const auto& [k, v] : base.items()) csv += "# " + k + "=" + v + "\n";
  csv += "# fixed_steps=" + std::to_string(fixed_steps) + "\n";
  csv += "kind,q,seed,sigma,sigma_eff,rbar,final_loss,final_accuracy\n";
  for (const auto& r : result.rows)
    csv += std::string(r.median ? "median" : "run") + "," + fmt9(r.q) + "," +
           (r.median ? std::string("-") : std::to_string(r.seed)) + "," + fmt9(r.sigma) + "," + fmt9(r.sigma_eff) +
           "," + fmt9(r.rbar) + "," + fmt9(r.final_loss) + "," + fmt9(r.final_accuracy) + "\n";
  result.csv = std::move(csv);
  return result;
}

namespace {

SeqBatch random_batch(Index batch, Index steps, Index vocab, Index classes, SeededRng& rng) {
  SeqBatch b;
  b.token_ids = IntMatrix(batch, steps);
  b.labels = IntVector(batch);
  for (Index i = 0; i < batch; ++i) {
    for (Index t = 0; t < steps; ++t) b.token_ids(i, t) = static_cast<std::int32_t>(rng.uniform_index(vocab));
    b.labels(i) = static_cast<std::int32_t>(rng.uniform_index(classes));
  }
  return b;
}

}  // namespace

BenchResult run_bench(const BenchConfig& cfg) {
  SeededRng root(cfg.seed);
  SeededRng init_rng = root.fork(1);
  std::vector<Index> hidden_dims(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden_dim);
  const ModelSpec model = ModelSpec::make(InputEncoding::Embedding, cfg.vocab, cfg.embed_dim, hidden_dims,
                                          cfg.classes, /*bias=*/true, init_rng);

  const auto run_once = [&](const std::string& mode, Index batch) {
    SeededRng data_rng = root.fork(1000 + static_cast<std::uint64_t>(batch));
    const SeqBatch b = random_batch(batch, cfg.t, cfg.vocab, cfg.classes, data_rng);
    if (mode == "nonprivate") {
      const Forward f = forward(model, b);
      const Tensor grad = backward_aggregate(model, f, Vector::Ones(batch));
      (void)grad;
    } else {
      Forward f = forward(model, b);
      LayerTape tape = backward_tape(model, std::move(f));
      const Tensor sum = clipped_grad_sum(model, tape, cfg.clip, clipping_mode_from_string(mode));
      (void)sum;
    }
  };

  const auto peak_at = [&](const std::string& mode, Index batch) {
    MeterScope scope;
    run_once(mode, batch);
    return static_cast<double>(scope.peak());
  };

  const std::vector<std::string> modes = {"nonprivate", "naive", "layerwise", "ghost", "auto"};
  BenchResult result;
  for (const auto& mode : modes) {
    if (peak_at(mode, 1) > cfg.float_budget)
      throw InfeasibleError("bench: float budget too small for a single example in mode " + mode);
    Index lo = 1, hi = 2;
    while (hi <= cfg.max_batch_cap && peak_at(mode, hi) <= cfg.float_budget) {
      lo = hi;
      hi *= 2;
    }
    if (hi > cfg.max_batch_cap) {
      lo = cfg.max_batch_cap;
    } else {
      while (hi - lo > 1) {
        const Index mid = lo + (hi - lo) / 2;
        (peak_at(mode, mid) <= cfg.float_budget ? lo : hi) = mid;
      }
    }
    BenchRow row;
    row.mode = mode;
    row.max_batch = lo;
    row.instrumented_peak = peak_at(mode, lo);
    row.ledger_peak = mode == "nonprivate"
                          ? mem_cost_nonprivate(model, lo, cfg.t)
                          : mem_cost(model, lo, cfg.t, clipping_mode_from_string(mode)).peak_total;
    result.rows.push_back(std::move(row));
  }

  result.common_batch = result.rows.front().max_batch;
  for (const auto& r : result.rows) result.common_batch = std::min(result.common_batch, r.max_batch);
  result.ledger_at_common = mem_cost(model, result.common_batch, cfg.t, ClippingMode::Ghost);

  double nonprivate_rate = 0;
  for (auto& row : result.rows) {
    run_once(row.mode, result.common_batch);  // warmup
    const auto start = std::chrono::steady_clock::now();
    for (Index i = 0; i < cfg.timing_steps; ++i) run_once(row.mode, result.common_batch);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    row.examples_per_sec =
        static_cast<double>(cfg.timing_steps) * static_cast<double>(result.common_batch) / elapsed.count();
    if (row.mode == "nonprivate") nonprivate_rate = row.examples_per_sec;
  }
  for (auto& row : result.rows) row.rel_throughput = row.examples_per_sec / nonprivate_rate;

  std::string csv;
  csv += "# dpgrad bench\n";
  csv += "# vocab=" + std::to_string(cfg.vocab) + "\n";
  csv += "# embed_dim=" + std::to_string(cfg.embed_dim) + "\n";
  csv += "# hidden_dim=" + std::to_string(cfg.hidden_dim) + "\n";
  csv += "# hidden_layers=" + std::to_string(cfg.hidden_layers) + "\n";
  csv += "# classes=" + std::to_string(cfg.classes) + "\n";
  csv += "# t=" + std::to_string(cfg.t) + "\n";
  csv += "# float_budget=" + fmt9(cfg.float_budget) + "\n";
  csv += "# seed=" + std::to_string(cfg.seed) + "\n";
  csv += "# common_batch=" + std::to_string(result.common_batch) + "\n";
  csv += "# note: examples_per_sec and rel_throughput are wall-clock measurements\n";
  csv += "mode,max_batch,ledger_peak,instrumented_peak,examples_per_sec,rel_throughput\n";
  for (const auto& r : result.rows)
    csv += r.mode + "," + std::to_string(r.max_batch) + "," + fmt9(r.ledger_peak) + "," +
           fmt9(r.instrumented_peak) + "," + fmt9(r.examples_per_sec) + "," + fmt9(r.rel_throughput) + "\n";
  for (const auto& layer : result.ledger_at_common.layers)
    csv += "# ledger_layer name=" + layer.name + " t=" + std::to_string(layer.t) + " d=" + std::to_string(layer.d) +
           " p=" + std::to_string(layer.p) + " naive=" + fmt9(layer.naive_cost) + " ghost=" +
           fmt9(layer.ghost_cost) + " ratio_pd_2t2=" + fmt9(layer.ratio_half) + " ratio_pd_t2=" +
           fmt9(layer.ratio_full) + "\n";
  result.csv = std::move(csv);
  return result;
}

std::string accountant_epsilon_report(double sigma, double q, long steps, double delta, bool csv) {
  const DpConversion conv = rdp_to_dp(rdp_curve(sigma, q), steps, delta);
  const double gdp = gdp_clt_epsilon(sigma, q, steps, delta);
  std::ostringstream os;
  if (csv) {
    os << "sigma,q,steps,delta,epsilon_rdp,order,epsilon_gdp_clt\n"
       << fmt9(sigma) << "," << fmt9(q) << "," << steps << "," << fmt9(delta) << "," << fmt9(conv.epsilon) << ","
       << fmt9(conv.order) << "," << fmt9(gdp) << "\n";
  } else {
    os << "sigma           = " << fmt9(sigma) << "\n"
       << "q               = " << fmt9(q) << "\n"
       << "steps           = " << steps << "\n"
       << "delta           = " << fmt9(delta) << "\n"
       << "epsilon (RDP)   = " << fmt9(conv.epsilon) << "  (order " << fmt9(conv.order) << ")\n"
       << "epsilon (GDP-CLT estimate) = " << fmt9(gdp) << "\n";
  }
  return os.str();
}

std::string accountant_sigma_report(double epsilon, double delta, double q, long steps, bool csv) {
  const SigmaSolveResult r = solve_sigma({epsilon, delta}, {q, steps});
  std::ostringstream os;
  if (csv) {
    os << "epsilon,delta,q,steps,sigma,achieved_epsilon,bracket_width\n"
       << fmt9(epsilon) << "," << fmt9(delta) << "," << fmt9(q) << "," << steps << "," << fmt9(r.sigma) << ","
       << fmt9(r.achieved_epsilon) << "," << fmt9(r.bracket_width) << "\n";
  } else {
    os << "epsilon target  = " << fmt9(epsilon) << "\n"
       << "delta           = " << fmt9(delta) << "\n"
       << "q               = " << fmt9(q) << "\n"
       << "steps           = " << steps << "\n"
       << "sigma           = " << fmt9(r.sigma) << (r.hit_lower_bound ? "  (bracket lower bound)" : "") << "\n"
       << "achieved epsilon = " << fmt9(r.achieved_epsilon) << "\n";
  }
  return os.str();
}

std::string accountant_sweep_report(long n, long epochs, double epsilon, double delta,
                                    std::span<const double> q_grid, bool csv) {
  const SqrtRuleTable table = sqrt_rule_check({epsilon, delta}, n, epochs, q_grid);
  std::ostringstream os;
  if (csv) {
    os << "# c=" << fmt9(table.c) << "\n";
    os << "q,batch,steps,sigma,sigma_eff,fitted_c_sqrt_q,relative_residual\n";
    for (const auto& row : table.rows)
      os << fmt9(row.q) << "," << fmt9(row.batch) << "," << row.steps << "," << fmt9(row.sigma) << ","
         << fmt9(row.sigma / row.q) << "," << fmt9(row.fitted) << "," << fmt9(row.residual) << "\n";
  } else {
    os << "sqrt-rule fit: sigma ~ c*sqrt(q), c = " << fmt9(table.c) << " (fitted on q in [2^-7, 1])\n";
    for (const auto& row : table.rows)
      os << "q=" << fmt9(row.q) << " steps=" << row.steps << " sigma=" << fmt9(row.sigma)
         << " fitted=" << fmt9(row.fitted) << " residual=" << fmt9(row.residual) << "\n";
  }
  return os.str();
}

std::string dataset_csv(const SynthTask& task, const RunConfig& cfg) {
  std::string csv;
  csv += "# dpgrad gen-data\n";
  csv += "# seed=" + std::to_string(cfg.seed) + "\n";
  csv += "# n=" + std::to_string(cfg.n) + "\n";
  csv += "# t=" + std::to_string(cfg.t) + "\n";
  csv += "# vocab=" + std::to_string(cfg.vocab) + "\n";
  csv += "# classes=" + std::to_string(cfg.classes) + "\n";
  csv += "# embed_dim=" + std::to_string(cfg.embed_dim) + "\n";
  csv += "# label_noise=" + fmt9(cfg.label_noise) + "\n";
  csv += "# planted_accuracy=" + fmt9(task.planted_accuracy) + "\n";
  for (Index t = 0; t < cfg.t; ++t) csv += "tok_" + std::to_string(t) + ",";
  csv += "label\n";
  for (Index i = 0; i < task.data.batch(); ++i) {
    for (Index t = 0; t < cfg.t; ++t) csv += std::to_string(task.data.token_ids(i, t)) + ",";
    csv += std::to_string(task.data.labels(i)) + "\n";
  }
  return csv;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace dpgrad
