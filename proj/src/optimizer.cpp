// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/optimizer.hpp"

#include <cmath>
#include <limits>

namespace dpgrad {

AdamState AdamState::init(Index param_count) {
  AdamState s;
  s.m = Tensor({param_count});
  s.v = Tensor({param_count});
  return s;
}

std::vector<Index> poisson_sample(Index n, double q, SeededRng& rng) {
  if (q < 0 || q > 1) throw ValueError("poisson_sample: rate must lie in [0, 1]");
  std::vector<Index> picked;
  for (Index i = 0; i < n; ++i)
    if (rng.bernoulli(q)) picked.push_back(i);
  return picked;
}

PrivatizedParts privatize_parts(const Tensor& clipped_sum, const NoiseSpec& spec, SeededRng& rng) {
  if (spec.batch_denominator <= 0) throw ValueError("privatize: batch denominator must be positive");
  if (spec.sigma < 0) throw ValueError("privatize: sigma must be nonnegative");
  const double inv_b = 1.0 / static_cast<double>(spec.batch_denominator);

  // sigma = 0 means no noise even under the disabled-clipping sentinel C = inf.
  const double noise_std = spec.sigma == 0 ? 0.0 : spec.sigma * spec.clip;
  Tensor noise = gaussian_noise({clipped_sum.size()}, noise_std, rng);
  PrivatizedParts parts;
  parts.signal_norm = clipped_sum.vec().norm() * inv_b;
  parts.noise_norm = noise.vec().norm() * inv_b;
  parts.gbar = Tensor({clipped_sum.size()});
  parts.gbar.vec() = (clipped_sum.vec() + noise.vec()) * inv_b;
  return parts;
}

Tensor privatize(const Tensor& clipped_sum, const NoiseSpec& spec, SeededRng& rng) {
  return privatize_parts(clipped_sum, spec, rng).gbar;
}

void dp_sgd_step(Tensor& params, const Tensor& gbar, double eta) {
  if (params.size() != gbar.size()) throw ShapeError("dp_sgd_step: parameter/gradient length mismatch");
  params.vec() -= eta * gbar.vec();
}

void dp_adam_step(AdamState& state, Tensor& params, const Tensor& gbar, double eta) {
  if (params.size() != gbar.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("dp_adam_step: parameter/state length mismatch");
  state.t += 1;
  state.m.vec() = state.beta1 * state.m.vec() + (1.0 - state.beta1) * gbar.vec();
  state.v.vec().array() = state.beta2 * state.v.vec().array() + (1.0 - state.beta2) * gbar.vec().array().square();
  const double mc = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double vc = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.vec().array() -=
      eta * (state.m.vec().array() / mc) / ((state.v.vec().array() / vc).sqrt() + state.gamma);
}

double signal_to_noise(double signal_norm, double noise_norm) {
  if (noise_norm == 0) return std::numeric_limits<double>::infinity();
  return signal_norm / noise_norm;
}

PrivatizedParts scaled_privatized_step(const ModelSpec& model, const SeqBatch& batch, const NoiseSpec& spec,
                                       LossScale scale, ClippingMode mode, SeededRng& noise_rng,
                                       bool buggy_alternative) {
  if (!(scale.k > 0)) throw ValueError("scaled_privatized_step: loss scale must be positive");
  const double k = scale.k;

  Forward f = forward(model, batch);
  LayerTape tape = backward_tape(model, std::move(f), /*loss_scale=*/k);
  const PerExampleNorms scaled_norms = per_example_norms(tape, mode);

  // Correct recipe clips the K-scaled gradients by C*K and adds the usual
  // noise times K; the documented buggy alternative clips them by C and adds
  // the noise unscaled.
  const double threshold = buggy_alternative ? spec.clip : spec.clip * k;
  const ClipFactors factors = clip_factors(scaled_norms, threshold);
  const Vector weights = k * factors.c;
  Tensor scaled_sum = backward_weighted(model, tape, weights);

  const double noise_std = spec.sigma == 0 ? 0.0 : spec.sigma * spec.clip * (buggy_alternative ? 1.0 : k);
  Tensor noise = gaussian_noise({scaled_sum.size()}, noise_std, noise_rng);
  const double inv_kb = 1.0 / (k * static_cast<double>(spec.batch_denominator));

  PrivatizedParts parts;
  parts.signal_norm = scaled_sum.vec().norm() * inv_kb;
  parts.noise_norm = noise.vec().norm() * inv_kb;
  parts.mean_loss = tape.losses.mean();
  parts.gbar = Tensor({scaled_sum.size()});
  parts.gbar.vec() = (scaled_sum.vec() + noise.vec()) * inv_kb;
  return parts;
}

}  // namespace dpgrad
