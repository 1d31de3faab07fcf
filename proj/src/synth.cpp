// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/synth.hpp"

#include <cmath>

namespace dpgrad {

SynthTask gen_synthetic_task(std::uint64_t seed, Index n, Index steps, Index vocab, Index num_classes,
                             Index embed_dim, double label_noise) {
  if (n <= 0 || steps <= 0 || vocab <= 0 || num_classes <= 0 || embed_dim <= 0)
    throw ValueError("gen_synthetic_task: all dims must be positive");
  if (num_classes > vocab) throw ValueError("gen_synthetic_task: num_classes must not exceed vocab");
  if (label_noise < 0 || label_noise > 1) throw ValueError("gen_synthetic_task: label_noise must lie in [0, 1]");
  SeededRng rng(seed);

  SynthTask task;
  task.label_noise = label_noise;
  task.data.token_ids = IntMatrix(n, steps);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < steps; ++t) task.data.token_ids(i, t) = static_cast<std::int32_t>(rng.uniform_index(vocab));

  task.planted_embed = Tensor({vocab, embed_dim});
  for (Index i = 0; i < task.planted_embed.size(); ++i) task.planted_embed(i) = rng.normal();
  {
    auto m = task.planted_embed.mat();
    m.rowwise() -= m.colwise().mean();  // center so pooled features are zero-mean
  }

  task.planted_weight = Tensor({num_classes, embed_dim});
  for (Index i = 0; i < task.planted_weight.size(); ++i) task.planted_weight(i) = rng.normal();
  if (num_classes <= embed_dim) {
    // Orthonormal score directions keep the argmax classes balanced.
    Matrix wt = task.planted_weight.mat().transpose();
    Eigen::HouseholderQR<Matrix> qr(wt);
    Matrix q = qr.householderQ() * Matrix::Identity(embed_dim, num_classes);
    task.planted_weight.mat() = q.transpose();
  } else {
    task.planted_weight.mat().rowwise().normalize();
  }

  // Mean-pooled features and raw planted scores.
  Tensor scores({n, num_classes});
  {
    Tensor pooled({n, embed_dim});
    auto table = task.planted_embed.mat();
    for (Index i = 0; i < n; ++i) {
      auto row = pooled.mat().row(i);
      row.setZero();
      for (Index t = 0; t < steps; ++t) row += table.row(task.data.token_ids(i, t));
      row /= static_cast<double>(steps);
    }
    scores.mat().noalias() = pooled.mat() * task.planted_weight.mat().transpose();
  }

  task.score_mean = scores.mat().colwise().mean();
  task.score_std = Vector(num_classes);
  for (Index k = 0; k < num_classes; ++k) {
    const double var = (scores.mat().col(k).array() - task.score_mean(k)).square().mean();
    task.score_std(k) = std::sqrt(std::max(var, 1e-30));
  }

  task.data.labels = IntVector(n);
  Index hits = 0;
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < num_classes; ++k) {
      const double s = (scores(i, k) - task.score_mean(k)) / task.score_std(k);
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    Index label = best;
    if (label_noise > 0 && rng.bernoulli(label_noise)) label = rng.uniform_index(num_classes);
    task.data.labels(i) = static_cast<std::int32_t>(label);
    hits += (label == best);
  }
  task.planted_accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return task;
}

SeqBatch gather(const SeqBatch& data, std::span<const Index> idx) {
  SeqBatch out;
  out.token_ids = IntMatrix(static_cast<Index>(idx.size()), data.steps());
  out.labels = IntVector(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.token_ids.row(static_cast<Index>(r)) = data.token_ids.row(idx[r]);
    out.labels(static_cast<Index>(r)) = data.labels(idx[r]);
  }
  return out;
}

}  // namespace dpgrad
