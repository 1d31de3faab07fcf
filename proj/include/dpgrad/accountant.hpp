// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "dpgrad/common.hpp"

namespace dpgrad {

/// Poisson-subsampled mechanism schedule: sampling rate q and step count S.
struct SamplingPlan {
  double q = 1.0;
  long steps = 1;

  /// q = batch/n, S = epochs * ceil(n/batch).
  static SamplingPlan from_dataset(long n, long batch, long epochs);
};

struct PrivacyBudget {
  double epsilon;
  double delta;
};

/// Per-step Renyi leakage rho(alpha) over a grid of orders; S steps compose
/// additively to S * rho(alpha).
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> values;
};

/// Default order grid: {1.25, 1.5, 1.75} plus the integers 2..256.
std::vector<double> default_orders();

/// Renyi leakage of one step of the subsampled Gaussian mechanism under
/// add/remove adjacency.  q = 1 is the plain Gaussian mechanism, alpha/(2
/// sigma^2), exact for any real order.  For q < 1 integer orders use the
/// binomial expansion evaluated in log space; non-integer orders evaluate at
/// floor/ceil and take the max (conservative).
double rdp_step(double sigma, double q, double alpha);

RdpCurve rdp_curve(double sigma, double q, std::span<const double> orders);
RdpCurve rdp_curve(double sigma, double q);

struct DpConversion {
  double epsilon;
  double order;  // arg-min order of the conversion
};

/// eps = min over orders of [S * rho(alpha) + log(1/delta)/(alpha - 1)].
DpConversion rdp_to_dp(const RdpCurve& curve, long steps, double delta);

double gdp_mu(double sigma, double q, long steps);

/// Gaussian-DP central-limit-theorem estimate of epsilon: solves
/// delta = Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2) on [0, 100].
/// This is an estimate, not an upper bound.
double gdp_clt_epsilon(double sigma, double q, long steps, double delta);

struct SigmaSolveResult {
  double sigma = 0;
  double achieved_epsilon = 0;
  double bracket_width = 0;
  bool hit_lower_bound = false;
};

/// Smallest sigma on the bisection grid (bracket [0.3, 50], tolerance 1e-4)
/// with rdp_to_dp(sigma) <= budget.epsilon.  Throws InfeasibleError when even
/// sigma = 50 cannot meet the budget.
SigmaSolveResult solve_sigma(const PrivacyBudget& budget, const SamplingPlan& plan);
SigmaSolveResult solve_sigma(const PrivacyBudget& budget, const SamplingPlan& plan, double lo, double hi,
                             double tol);

double effective_noise_multiplier(double sigma, double q);

struct SqrtRuleRow {
  double q;
  double batch;      // implied expected batch size q * n
  long steps;
  double sigma;      // numeric solve at this q
  double fitted;     // c * sqrt(q)
  double residual;   // (sigma - c*sqrt(q)) / sigma
};

struct SqrtRuleTable {
  double c;  // constant fitted on q in [2^-7, 1]
  std::vector<SqrtRuleRow> rows;
};

/// Solves sigma over a q grid at fixed epochs and checks the sigma ~ c*sqrt(q)
/// rule.  c equalizes the extreme relative deviations over the fit range
/// (minimax constant), and each row reports its relative residual; rows below
/// the fit range expose where the rule underestimates sigma.
SqrtRuleTable sqrt_rule_check(const PrivacyBudget& budget, long n, long epochs, std::span<const double> q_grid);

}  // namespace dpgrad
