// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace dpgrad {
namespace {

double log_binomial(long n, long k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// log sum exp over the binomial expansion terms for integer alpha.
double rho_integer(double sigma, double q, long alpha) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(alpha) + 1);
  for (long k = 0; k <= alpha; ++k) {
    double t = log_binomial(alpha, k) + static_cast<double>(k) * std::log(q) +
               static_cast<double>(alpha - k) * std::log1p(-q) + static_cast<double>(k) * (k - 1) * inv2s2;
    terms[static_cast<std::size_t>(k)] = t;
    max_term = std::max(max_term, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  const double lse = max_term + std::log(acc);
  // The k=0,1 terms alone sum to >= 1, so the true value is nonnegative.
  return std::max(0.0, lse / (alpha - 1.0));
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void check_mechanism_params(double sigma, double q) {
  if (sigma <= 0) throw ValueError("accountant: sigma must be positive");
  if (q <= 0 || q > 1) throw ValueError("accountant: sampling rate must lie in (0, 1]");
}

}  // namespace

SamplingPlan SamplingPlan::from_dataset(long n, long batch, long epochs) {
  if (n <= 0 || batch <= 0 || epochs <= 0) throw ValueError("SamplingPlan: n, batch, epochs must be positive");
  if (batch > n) throw ValueError("SamplingPlan: batch exceeds dataset size");
  SamplingPlan plan;
  plan.q = static_cast<double>(batch) / static_cast<double>(n);
  plan.steps = epochs * ((n + batch - 1) / batch);
  return plan;
}

std::vector<double> default_orders() {
  std::vector<double> orders = {1.25, 1.5, 1.75};
  for (int a = 2; a <= 256; ++a) orders.push_back(a);
  return orders;
}

double rdp_step(double sigma, double q, double alpha) {
  check_mechanism_params(sigma, q);
  if (alpha <= 1) throw ValueError("rdp_step: order must exceed 1");
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  const double fl = std::floor(alpha);
  if (fl == alpha) return rho_integer(sigma, q, static_cast<long>(alpha));
  double value = rho_integer(sigma, q, static_cast<long>(std::ceil(alpha)));
  if (fl >= 2.0) value = std::max(value, rho_integer(sigma, q, static_cast<long>(fl)));
  return value;
}

RdpCurve rdp_curve(double sigma, double q, std::span<const double> orders) {
  if (orders.empty()) throw ValueError("rdp_curve: empty order grid");
  RdpCurve curve;
  curve.orders.assign(orders.begin(), orders.end());
  curve.values.reserve(orders.size());
  for (double a : orders) curve.values.push_back(rdp_step(sigma, q, a));
  return curve;
}

RdpCurve rdp_curve(double sigma, double q) {
  const auto orders = default_orders();
  return rdp_curve(sigma, q, orders);
}

DpConversion rdp_to_dp(const RdpCurve& curve, long steps, double delta) {
  if (curve.orders.empty()) throw ValueError("rdp_to_dp: empty order grid");
  if (delta <= 0 || delta >= 1) throw ValueError("rdp_to_dp: delta must lie in (0, 1)");
  if (steps < 1) throw ValueError("rdp_to_dp: steps must be positive");
  const double log_inv_delta = std::log(1.0 / delta);
  DpConversion best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double a = curve.orders[i];
    const double eps = static_cast<double>(steps) * curve.values[i] + log_inv_delta / (a - 1.0);
    if (eps < best.epsilon) best = {eps, a};
  }
  return best;
}

double gdp_mu(double sigma, double q, long steps) {
  check_mechanism_params(sigma, q);
  return q * std::sqrt(static_cast<double>(steps)) * std::sqrt(std::expm1(1.0 / (sigma * sigma)));
}

double gdp_clt_epsilon(double sigma, double q, long steps, double delta) {
  if (delta <= 0 || delta >= 1) throw ValueError("gdp_clt_epsilon: delta must lie in (0, 1)");
  const double mu = gdp_mu(sigma, q, steps);
  const auto delta_of = [mu](double eps) {
    return std_normal_cdf(-eps / mu + mu / 2.0) - std::exp(eps) * std_normal_cdf(-eps / mu - mu / 2.0);
  };
  double lo = 0.0, hi = 100.0;
  if (delta_of(lo) <= delta) return 0.0;  // already (0, delta)-DP under the CLT estimate
  if (delta_of(hi) > delta) throw InfeasibleError("gdp_clt_epsilon: no root in [0, 100]");
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (delta_of(mid) > delta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SigmaSolveResult solve_sigma(const PrivacyBudget& budget, const SamplingPlan& plan) {
  return solve_sigma(budget, plan, 0.3, 50.0, 1e-4);
}

SigmaSolveResult solve_sigma(const PrivacyBudget& budget, const SamplingPlan& plan, double lo, double hi,
                             double tol) {
  if (budget.epsilon <= 0) throw ValueError("solve_sigma: epsilon must be positive");
  if (budget.delta <= 0 || budget.delta >= 1) throw ValueError("solve_sigma: delta must lie in (0, 1)");
  const auto eps_at = [&](double sigma) {
    return rdp_to_dp(rdp_curve(sigma, plan.q), plan.steps, budget.delta).epsilon;
  };

  // Track evaluations: epsilon must be nonincreasing in sigma.
  std::vector<std::pair<double, double>> seen;
  const auto eval = [&](double sigma) {
    const double e = eps_at(sigma);
    for (const auto& [s0, e0] : seen) {
      const bool ok = (s0 < sigma) ? (e <= e0 + 1e-9) : (e + 1e-9 >= e0);
      if (!ok) throw StateError("solve_sigma: epsilon is not monotone in sigma");
    }
    seen.emplace_back(sigma, e);
    return e;
  };

  if (eval(hi) > budget.epsilon)
    throw InfeasibleError("solve_sigma: budget unreachable within sigma bracket [" + fmt9(lo) + ", " + fmt9(hi) +
                          "]");
  if (eval(lo) <= budget.epsilon) return {lo, eps_at(lo), 0.0, true};

  double a = lo, b = hi;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    (eval(mid) <= budget.epsilon ? b : a) = mid;
  }
  return {b, eps_at(b), b - a, false};
}

double effective_noise_multiplier(double sigma, double q) {
  if (q <= 0) throw ValueError("effective_noise_multiplier: q must be positive");
  return sigma / q;
}

SqrtRuleTable sqrt_rule_check(const PrivacyBudget& budget, long n, long epochs, std::span<const double> q_grid) {
  constexpr double kFitLow = 1.0 / 128.0;  // fit range [2^-7, 1]
  SqrtRuleTable table;
  table.rows.reserve(q_grid.size());
  for (double q : q_grid) {
    if (q <= 0 || q > 1) throw ValueError("sqrt_rule_check: q grid must lie in (0, 1]");
    SamplingPlan plan;
    plan.q = q;
    plan.steps = epochs * static_cast<long>(std::ceil(1.0 / q - 1e-12));
    const double sigma = solve_sigma(budget, plan).sigma;
    table.rows.push_back({q, q * static_cast<double>(n), plan.steps, sigma, 0.0, 0.0});
  }

  // Minimax constant over the fit range: equalizes the extreme relative
  // deviations of sigma vs c*sqrt(q).
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  for (const auto& row : table.rows) {
    if (row.q < kFitLow - 1e-15) continue;
    const double r = row.sigma / std::sqrt(row.q);
    r_min = std::min(r_min, r);
    r_max = std::max(r_max, r);
  }
  if (!std::isfinite(r_min)) throw ValueError("sqrt_rule_check: no grid points in the fit range [2^-7, 1]");
  table.c = 2.0 * r_min * r_max / (r_min + r_max);
  for (auto& row : table.rows) {
    row.fitted = table.c * std::sqrt(row.q);
    row.residual = (row.sigma - row.fitted) / row.sigma;
  }
  return table;
}

}  // namespace dpgrad
