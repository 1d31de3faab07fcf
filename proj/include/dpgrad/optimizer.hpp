// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <vector>

#include "dpgrad/clipping.hpp"
#include "dpgrad/model.hpp"

namespace dpgrad {

/// Privatization parameters: the noise added to the clipped-gradient sum has
/// standard deviation sigma * clip per coordinate, and the sum is divided by
/// the fixed expected batch size (never the realized batch size).
struct NoiseSpec {
  double clip = 0.1;
  double sigma = 0.0;
  Index batch_denominator = 1;
};

struct AdamState {
  Tensor m;
  Tensor v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double gamma = 1e-8;  // division guard

  static AdamState init(Index param_count);
};

/// Loss-scaling factor K for the scale-invariant privatization recipe.
struct LossScale {
  double k = 1.0;
};

/// Each index enters the batch independently with probability q; the result
/// may be empty.  Consumes one rng tick per index.
std::vector<Index> poisson_sample(Index n, double q, SeededRng& rng);

/// (clipped_sum + z) / B with z ~ N(0, sigma^2 clip^2 I).  The noise draw
/// happens even for sigma = 0 so rng streams do not depend on sigma.
Tensor privatize(const Tensor& clipped_sum, const NoiseSpec& spec, SeededRng& rng);

/// privatize plus the norms of its two parts: signal ||clipped_sum/B|| and
/// noise ||z/B||, the quantities the signal-to-noise ratio compares.
struct PrivatizedParts {
  Tensor gbar;
  double signal_norm = 0;
  double noise_norm = 0;
  double mean_loss = std::numeric_limits<double>::quiet_NaN();  // set by the pipeline step
};
PrivatizedParts privatize_parts(const Tensor& clipped_sum, const NoiseSpec& spec, SeededRng& rng);

void dp_sgd_step(Tensor& params, const Tensor& gbar, double eta);

/// Adam with bias correction at the post-increment step count:
/// theta <- theta - eta * m_hat / (sqrt(v_hat) + gamma).
void dp_adam_step(AdamState& state, Tensor& params, const Tensor& gbar, double eta);

/// ||signal|| / ||noise||; +infinity when the noise norm is zero.
double signal_to_noise(double signal_norm, double noise_norm);

/// One privatized gradient under the loss-scaling recipe: scale the loss by
/// K, clip per-example gradients by C*K, add the usual Gaussian noise times
/// K, downscale by K.  In exact arithmetic the result equals the unscaled
/// pipeline with the same noise seed.  `buggy_alternative` clips the K-scaled
/// gradients by C instead (the recipe that breaks scale invariance); it
/// exists so the regression test can demonstrate the difference.
PrivatizedParts scaled_privatized_step(const ModelSpec& model, const SeqBatch& batch, const NoiseSpec& spec,
                                       LossScale scale, ClippingMode mode, SeededRng& noise_rng,
                                       bool buggy_alternative = false);

}  // namespace dpgrad
