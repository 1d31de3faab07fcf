// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dpgrad/tensor.hpp"

namespace dpgrad {

/// A batch of token sequences with one class label per sequence.
struct SeqBatch {
  IntMatrix token_ids;  // B x T, values in [0, vocab)
  IntVector labels;     // B, values in [0, num_classes)

  Index batch() const { return token_ids.rows(); }
  Index steps() const { return token_ids.cols(); }
};

/// How token ids become the first feature tensor.  Embedding is the trainable
/// lookup table; OneHot feeds dense one-hot rows to the first linear layer,
/// which is the same map written as a matrix product (used at small vocab to
/// cross-check the embedding gradient path).
enum class InputEncoding { Embedding, OneHot };

struct LinearLayer {
  Tensor weight;  // out_dim x in_dim
  Tensor bias;    // out_dim; empty when has_bias is false
  bool has_bias = false;
};

/// Sequence classifier: input encoding -> [linear -> tanh]* -> mean pool over
/// time -> linear head.  No parameter sharing anywhere; the embedding table is
/// not tied to the head.
struct ModelSpec {
  InputEncoding input = InputEncoding::Embedding;
  Index vocab = 0;
  Index embed_dim = 0;  // feature dim after the input encoding; equals vocab for OneHot
  Tensor embedding;     // vocab x embed_dim, only for InputEncoding::Embedding
  std::vector<LinearLayer> hidden;
  LinearLayer classifier;
  Index num_classes = 0;

  static ModelSpec make(InputEncoding input, Index vocab, Index embed_dim, std::vector<Index> hidden_dims,
                        Index num_classes, bool bias, SeededRng& rng);

  Index feature_dim() const { return input == InputEncoding::Embedding ? embed_dim : vocab; }
  Index pooled_dim() const { return hidden.empty() ? feature_dim() : hidden.back().weight.extent(0); }
  Index param_count() const;

  /// Parameterized layers in flat-vector order with their offsets.
  struct LayerInfo {
    std::string name;
    bool is_embedding = false;
    bool has_bias = false;
    Index in_dim = 0;   // d (= vocab for the embedding layer)
    Index out_dim = 0;  // p
    Index w_offset = 0;
    Index b_offset = -1;
  };
  std::vector<LayerInfo> layer_infos() const;

  Tensor params_flat() const;
  void set_params_flat(const Tensor& flat);

  /// Verifies that adjacent layer dimensions compose.
  void check() const;
  void validate_batch(const SeqBatch& batch) const;
};

/// Cached activations from one forward pass; consumed by backward_tape.
struct Forward {
  const ModelSpec* model = nullptr;
  Index batch = 0;
  Index steps = 0;
  std::vector<Tensor> acts;  // acts[0] = input features (B,T,F0); acts[l+1] = post-tanh output of hidden layer l
  Tensor pooled;             // B x F
  Tensor probs;              // B x K softmax
  Vector losses;             // per-example cross-entropy
  IntMatrix ids;
  IntVector labels;
  bool valid = false;
};

Forward forward(const ModelSpec& model, const SeqBatch& batch);

/// Per-layer capture of what the clipping strategies consume: the layer input
/// a (activations, or token ids for the embedding) and the gradient g of
/// sum_i loss_scale * L_i with respect to the layer output.  The head's entry
/// has t = 1 (its input is the pooled feature vector).
struct TapeEntry {
  std::string name;
  bool is_embedding = false;
  bool has_bias = false;
  Index t = 0, d = 0, p = 0;
  Tensor a;       // (B, t, d); empty for the embedding entry
  IntMatrix ids;  // (B, t); embedding entry only
  Tensor g;       // (B, t, p)
};

struct LayerTape {
  std::vector<TapeEntry> entries;
  Vector losses;
  Tensor pre_pool;  // post-tanh features entering the mean pool (B, T, F)
  Tensor probs;
  IntVector labels;
  Index batch = 0;
  Index steps = 0;
  double loss_scale = 1.0;
  const ModelSpec* model = nullptr;
  bool valid = false;
};

/// Consumes the forward cache and returns the tape.  loss_scale multiplies the
/// loss before differentiation, so every recorded g (and hence every gradient
/// norm downstream) scales by it.
LayerTape backward_tape(const ModelSpec& model, Forward&& fwd, double loss_scale = 1.0);

/// Gradient of sum_i w_i * L_i with respect to all parameters, as a flat
/// vector of length param_count().  Linear in w.
Tensor backward_weighted(const ModelSpec& model, const LayerTape& tape, const Vector& weights);
Tensor backward_weighted(const ModelSpec& model, const SeqBatch& batch, const Vector& weights);

/// Aggregate gradient straight off the forward cache, with no per-layer
/// gradient recording: the non-private training path.
Tensor backward_aggregate(const ModelSpec& model, const Forward& fwd, const Vector& weights);

/// Per-example weight gradient of a linear layer: g_i^T a_i, a p x d matrix.
Matrix per_example_grad_linear(Eigen::Ref<const Matrix> a, Eigen::Ref<const Matrix> g);

}  // namespace dpgrad
