// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

namespace oracles {

using dpgrad::Index;

std::vector<double> forward_loops(const dpgrad::ModelSpec& model, const dpgrad::SeqBatch& batch) {
  const Index B = batch.batch(), T = batch.steps();
  const Index F0 = model.feature_dim();
  std::vector<double> losses(static_cast<std::size_t>(B));

  for (Index i = 0; i < B; ++i) {
    // features per timestep
    std::vector<std::vector<double>> x(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(F0), 0.0));
    for (Index t = 0; t < T; ++t) {
      const auto id = batch.token_ids(i, t);
      if (model.input == dpgrad::InputEncoding::Embedding) {
        for (Index f = 0; f < F0; ++f) x[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] = model.embedding(id, f);
      } else {
        x[static_cast<std::size_t>(t)][static_cast<std::size_t>(id)] = 1.0;
      }
    }
    for (const auto& layer : model.hidden) {
      const Index d = layer.weight.extent(1), p = layer.weight.extent(0);
      std::vector<std::vector<double>> y(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(p), 0.0));
      for (Index t = 0; t < T; ++t)
        for (Index r = 0; r < p; ++r) {
          double acc = layer.has_bias ? layer.bias(r) : 0.0;
          for (Index c = 0; c < d; ++c) acc += layer.weight(r, c) * x[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
          y[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] = std::tanh(acc);
        }
      x = std::move(y);
    }
    const Index F = model.pooled_dim(), K = model.num_classes;
    std::vector<double> pooled(static_cast<std::size_t>(F), 0.0);
    for (Index t = 0; t < T; ++t)
      for (Index f = 0; f < F; ++f) pooled[static_cast<std::size_t>(f)] += x[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] / static_cast<double>(T);
    std::vector<double> logits(static_cast<std::size_t>(K), 0.0);
    for (Index k = 0; k < K; ++k) {
      double acc = model.classifier.has_bias ? model.classifier.bias(k) : 0.0;
      for (Index f = 0; f < F; ++f) acc += model.classifier.weight(k, f) * pooled[static_cast<std::size_t>(f)];
      logits[static_cast<std::size_t>(k)] = acc;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0;
    for (double v : logits) z += std::exp(v - mx);
    losses[static_cast<std::size_t>(i)] = mx + std::log(z) - logits[static_cast<std::size_t>(batch.labels(i))];
  }
  return losses;
}

dpgrad::Tensor finite_difference_grad(dpgrad::ModelSpec& model, const dpgrad::SeqBatch& batch, double h) {
  dpgrad::Tensor params = model.params_flat();
  dpgrad::Tensor grad({params.size()});
  const auto loss_sum = [&] {
    const dpgrad::Forward f = dpgrad::forward(model, batch);
    return f.losses.sum();
  };
  for (Index j = 0; j < params.size(); ++j) {
    const double orig = params(j);
    params(j) = orig + h;
    model.set_params_flat(params);
    const double up = loss_sum();
    params(j) = orig - h;
    model.set_params_flat(params);
    const double down = loss_sum();
    params(j) = orig;
    grad(j) = (up - down) / (2.0 * h);
  }
  model.set_params_flat(params);
  return grad;
}

}  // namespace oracles
