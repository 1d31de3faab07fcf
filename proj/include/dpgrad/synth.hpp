// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dpgrad/model.hpp"

namespace dpgrad {

/// Synthetic sequence-classification task.  Tokens are uniform over the
/// vocabulary; labels come from a planted scorer over mean-pooled frozen
/// random embeddings (affine scores, per-class standardized over the dataset,
/// argmax).  With zero label noise the planted scorer is Bayes optimal and
/// scores 100% on its own labels.
struct SynthTask {
  SeqBatch data;
  Tensor planted_embed;   // vocab x dim, column-centered
  Tensor planted_weight;  // classes x dim, orthonormal rows when classes <= dim
  Vector score_mean;      // per-class standardization fitted on the dataset
  Vector score_std;
  double planted_accuracy = 0;
  double label_noise = 0;
};

SynthTask gen_synthetic_task(std::uint64_t seed, Index n, Index steps, Index vocab, Index num_classes,
                             Index embed_dim, double label_noise = 0.0);

/// Rows of `data` selected by `idx`.
SeqBatch gather(const SeqBatch& data, std::span<const Index> idx);

}  // namespace dpgrad
