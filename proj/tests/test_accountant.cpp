// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "dpgrad/accountant.hpp"
#include "dpgrad/tensor.hpp"
#include "oracles.hpp"

using namespace dpgrad;

TEST_CASE("q = 1 is the plain Gaussian mechanism, exactly") {
  CHECK(rdp_step(1.0, 1.0, 2.0) == 1.0);
  CHECK(rdp_step(2.0, 1.0, 3.0) == 3.0 / 8.0);
  CHECK(rdp_step(0.5, 1.0, 1.5) == 3.0);
}

TEST_CASE("rdp_step vanishes as q -> 0") {
  CHECK(rdp_step(1.0, 1e-8, 4.0) < 1e-6);
}

TEST_CASE("rdp_step matches the extended-precision direct-sum oracle") {
  // Frozen reference (40-digit computation): rho(1, 0.01, 16).
  CHECK(oracles::rel_err(rdp_step(1.0, 0.01, 16.0), 3.0878507836962446) < 1e-8);
  int compared = 0;
  for (double sigma : {0.7, 1.0, 2.5}) {
    for (double q : {0.001, 0.01, 0.3}) {
      for (int alpha : {2, 5, 16, 64, 200}) {
        if (!oracles::rho_direct_representable(sigma, alpha)) continue;  // the oracle itself would overflow
        const double engine = rdp_step(sigma, q, alpha);
        const double oracle = static_cast<double>(oracles::rho_direct(sigma, q, alpha));
        CHECK(oracles::rel_err(engine, oracle) < 1e-8);
        ++compared;
      }
    }
  }
  CHECK(compared >= 30);
}

TEST_CASE("rdp_step parameter errors") {
  CHECK_THROWS_AS(rdp_step(0.0, 0.5, 2.0), ValueError);
  CHECK_THROWS_AS(rdp_step(1.0, 0.5, 1.0), ValueError);
  CHECK_THROWS_AS(rdp_step(1.0, 1.5, 2.0), ValueError);
}

TEST_CASE("rdp curve monotonicity over random mechanisms") {
  SeededRng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const double sigma = 0.5 + 3.0 * rng.uniform01();
    const double q = 0.001 + 0.6 * rng.uniform01();
    const double alpha = 2 + rng.uniform_index(100);
    // nondecreasing in alpha
    CHECK(rdp_step(sigma, q, alpha + 1) >= rdp_step(sigma, q, alpha) - 1e-12);
    // nondecreasing in q
    CHECK(rdp_step(sigma, std::min(1.0, q * 1.5), alpha) >= rdp_step(sigma, q, alpha) - 1e-12);
    // nonincreasing in sigma
    CHECK(rdp_step(sigma * 1.5, q, alpha) <= rdp_step(sigma, q, alpha) + 1e-12);
  }
}

TEST_CASE("rdp_to_dp single-step Gaussian at delta = 1e-5") {
  const auto conv = rdp_to_dp(rdp_curve(1.0, 1.0), 1, 1e-5);
  // Analytic integer-order minimization: min_a a/2 + ln(1e5)/(a-1) at a = 6.
  CHECK(conv.epsilon == doctest::Approx(5.30258509299).epsilon(1e-3));
  CHECK(conv.order == 6.0);
}

TEST_CASE("rdp_to_dp limits and monotonicity") {
  const RdpCurve curve = rdp_curve(1.2, 0.05);
  const double eps_small_delta = rdp_to_dp(curve, 100, 1e-6).epsilon;
  const double eps_large_delta = rdp_to_dp(curve, 100, 1e-5).epsilon;
  CHECK(eps_small_delta > eps_large_delta);

  // delta -> 1^-: the log term vanishes and the minimum of S*rho remains.
  double min_srho = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.orders.size(); ++i) min_srho = std::min(min_srho, 100 * curve.values[i]);
  CHECK(rdp_to_dp(curve, 100, 1.0 - 1e-12).epsilon == doctest::Approx(min_srho).epsilon(1e-6));

  CHECK(rdp_to_dp(rdp_curve(2.0, 0.05), 100, 1e-5).epsilon < rdp_to_dp(rdp_curve(1.0, 0.05), 100, 1e-5).epsilon);
  CHECK(rdp_to_dp(curve, 200, 1e-5).epsilon > rdp_to_dp(curve, 100, 1e-5).epsilon);

  RdpCurve empty;
  CHECK_THROWS_AS(rdp_to_dp(empty, 1, 1e-5), ValueError);
}

TEST_CASE("gdp mu closed form at q=1, S=1, sigma=1") {
  CHECK(gdp_mu(1.0, 1.0, 1) == doctest::Approx(std::sqrt(std::exp(1.0) - 1.0)).epsilon(1e-12));
  CHECK(gdp_mu(1.0, 1.0, 1) == doctest::Approx(1.31083248).epsilon(1e-6));
}

TEST_CASE("gdp epsilon vanishes for huge sigma") {
  CHECK(gdp_clt_epsilon(1e6, 0.01, 1000, 1e-5) < 1e-3);
}

TEST_CASE("gdp range error when no root exists in the bracket") {
  // Enormous mu with tiny delta pushes the root beyond eps = 100.
  CHECK_THROWS_AS(gdp_clt_epsilon(0.30001, 1.0, 100000, 1e-12), InfeasibleError);
}

TEST_CASE("solve_sigma: tighter budgets need more noise") {
  const SamplingPlan plan{0.01, 2000};
  const double s3 = solve_sigma({3.0, 1e-5}, plan).sigma;
  const double s8 = solve_sigma({8.0, 1e-5}, plan).sigma;
  CHECK(s3 > s8);
}

TEST_CASE("solve_sigma round trip and achieved epsilon") {
  SeededRng rng(555);
  int feasible = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double eps = 0.5 + 8.0 * rng.uniform01();
    const double delta = std::pow(10.0, -4.0 - 2.0 * rng.uniform01());
    SamplingPlan plan;
    plan.q = 0.002 + 0.2 * rng.uniform01();
    plan.steps = 50 + static_cast<long>(rng.uniform_index(5000));
    SigmaSolveResult r;
    try {
      r = solve_sigma({eps, delta}, plan);
    } catch (const InfeasibleError&) {
      continue;  // tiny budget at a large q*S can legitimately exceed the bracket
    }
    ++feasible;
    CHECK(r.achieved_epsilon <= eps);
    if (!r.hit_lower_bound) CHECK(r.achieved_epsilon >= eps - 0.01);
    const double round = rdp_to_dp(rdp_curve(r.sigma, plan.q), plan.steps, delta).epsilon;
    CHECK(round == doctest::Approx(r.achieved_epsilon).epsilon(1e-12));
  }
  CHECK(feasible >= 15);
}

TEST_CASE("solve_sigma matches the independent reference accountant") {
  // Frozen before the build from a 40-digit mpmath implementation of the same
  // bound/conversion/bisection: sigma = 0.7508460999.
  SamplingPlan plan;
  plan.q = 1024.0 / 42061.0;
  plan.steps = 410;
  const SigmaSolveResult r = solve_sigma({8.0, 1.0 / (2.0 * 42061.0)}, plan);
  CHECK(std::abs(r.sigma - 0.7508460999) < 1e-3);
}

TEST_CASE("solve_sigma infeasible budget") {
  SamplingPlan plan{0.5, 1000000};
  CHECK_THROWS_AS(solve_sigma({0.01, 1e-7}, plan), InfeasibleError);
}

TEST_CASE("effective noise multiplier") {
  CHECK(effective_noise_multiplier(1.0, 0.01) == 100.0);
  CHECK(effective_noise_multiplier(2.5, 1.0) == 2.5);
  CHECK_THROWS_AS(effective_noise_multiplier(1.0, 0.0), ValueError);

  // Self-consistency sweep: at fixed (eps, delta, S), doubling q lowers sigma/q.
  const long steps = 500;
  const double delta = 1e-5;
  double prev = std::numeric_limits<double>::infinity();
  for (double q : {0.005, 0.01, 0.02, 0.04, 0.08}) {
    const double sigma = solve_sigma({3.0, delta}, {q, steps}).sigma;
    const double eff = effective_noise_multiplier(sigma, q);
    CHECK(eff < prev);
    prev = eff;
  }
}

TEST_CASE("gdp-clt underestimates the rdp epsilon") {
  for (double q : {0.01, 0.0243, 0.1}) {
    for (long steps : {200L, 420L, 2000L}) {
      const double delta = 1e-5;
      const double sigma = solve_sigma({3.0, delta}, {q, steps}).sigma;
      CHECK(gdp_clt_epsilon(sigma, q, steps, delta) < rdp_to_dp(rdp_curve(sigma, q), steps, delta).epsilon);
    }
  }
}

TEST_CASE("sampling plan derivation") {
  const SamplingPlan plan = SamplingPlan::from_dataset(42061, 1024, 10);
  CHECK(plan.q == doctest::Approx(1024.0 / 42061.0).epsilon(1e-15));
  CHECK(plan.steps == 420);
  CHECK_THROWS_AS(SamplingPlan::from_dataset(10, 0, 1), ValueError);
}

TEST_CASE("sqrt rule: smoke over a reduced grid") {
  // Appendix-style config at fewer grid points; the acceptance suite runs the
  // full version.  Doubling epochs at fixed q strictly increases sigma.
  const std::vector<double> grid = {1.0, 0.25, 1.0 / 128.0};
  const SqrtRuleTable table = sqrt_rule_check({3.0, 1e-5}, 50000, 50, grid);
  CHECK(table.rows.size() == 3);
  CHECK(table.c > 0);
  for (const auto& row : table.rows) CHECK(std::abs(row.residual) < 0.2);

  const double sigma_e50 = solve_sigma({3.0, 1e-5}, {0.25, 50 * 4}).sigma;
  const double sigma_e100 = solve_sigma({3.0, 1e-5}, {0.25, 100 * 4}).sigma;
  CHECK(sigma_e100 > sigma_e50);
}
