// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/clipping.hpp"

#include <algorithm>
#include <cmath>

namespace dpgrad {

const char* to_string(ClippingMode mode) {
  switch (mode) {
    case ClippingMode::Naive: return "naive";
    case ClippingMode::Layerwise: return "layerwise";
    case ClippingMode::Ghost: return "ghost";
    case ClippingMode::GhostAuto: return "auto";
  }
  return "?";
}

ClippingMode clipping_mode_from_string(const std::string& name) {
  if (name == "naive") return ClippingMode::Naive;
  if (name == "layerwise") return ClippingMode::Layerwise;
  if (name == "ghost") return ClippingMode::Ghost;
  if (name == "auto") return ClippingMode::GhostAuto;
  throw ValueError("unknown clipping mode: " + name);
}

double ghost_norm_linear(Eigen::Ref<const Matrix> a, Eigen::Ref<const Matrix> g) {
  if (a.rows() != g.rows())
    throw ShapeError("ghost_norm_linear: time extents differ: " + std::to_string(a.rows()) + " vs " +
                     std::to_string(g.rows()));
  const Index t = a.rows();
  Tensor gram_a({t, t}), gram_g({t, t});
  gram_a.mat().noalias() = a * a.transpose();
  gram_g.mat().noalias() = g * g.transpose();
  return (gram_a.vec().array() * gram_g.vec().array()).sum();
}

double ghost_norm_embedding(std::span<const std::int32_t> ids, Index vocab, Eigen::Ref<const Matrix> g) {
  const Index t = static_cast<Index>(ids.size());
  if (t != g.rows())
    throw ShapeError("ghost_norm_embedding: time extents differ: " + std::to_string(t) + " vs " +
                     std::to_string(g.rows()));
  for (std::int32_t id : ids)
    if (id < 0 || id >= vocab) throw ValueError("ghost_norm_embedding: token id out of range: " + std::to_string(id));
  Tensor gram_a({t, t}), gram_g({t, t});
  for (Index s = 0; s < t; ++s)
    for (Index u = 0; u < t; ++u) gram_a(s, u) = ids[static_cast<std::size_t>(s)] == ids[static_cast<std::size_t>(u)];
  gram_g.mat().noalias() = g * g.transpose();
  return (gram_a.vec().array() * gram_g.vec().array()).sum();
}

namespace {

double bias_sq_norm(Eigen::Ref<const Matrix> g) { return g.colwise().sum().squaredNorm(); }

// Scatter one example's embedding gradient rows into a vocab x embed_dim
// block (the same layout the flat parameter vector uses for the table).
void scatter_embedding(const IntMatrix& ids, Index example, Eigen::Ref<const Matrix> g, MatMap out) {
  for (Index t = 0; t < g.rows(); ++t) out.row(ids(example, t)) += g.row(t);
}

// Per-example gradient block shape within the flat layout: linear layers are
// p x d, the embedding table is d x p (vocab rows).
std::pair<Index, Index> grad_block_shape(const TapeEntry& e) {
  return e.is_embedding ? std::pair<Index, Index>{e.d, e.p} : std::pair<Index, Index>{e.p, e.d};
}

void check_tape(const LayerTape& tape) {
  if (!tape.valid || tape.entries.empty()) throw StateError("clipping: tape not built or incomplete");
  for (const auto& e : tape.entries)
    if (e.g.empty() || (!e.is_embedding && e.a.empty())) throw StateError("clipping: tape entry incomplete");
}

bool ghost_cheaper(Index t, Index d, Index p) { return 2 * t * t < p * d; }

}  // namespace

PerExampleNorms per_example_norms(const LayerTape& tape, ClippingMode mode) {
  check_tape(tape);
  const Index B = tape.batch;
  PerExampleNorms norms;
  norms.sq_norms = Vector::Zero(B);

  if (mode == ClippingMode::Naive) {
    if (tape.model == nullptr) throw StateError("clipping: naive mode needs the model's parameter layout");
    const Tensor grads = per_example_flat_grads(*tape.model, tape);
    for (Index i = 0; i < B; ++i) norms.sq_norms(i) = grads.mat().row(i).squaredNorm();
    return norms;
  }

  for (const auto& e : tape.entries) {
    const auto [rows, cols] = grad_block_shape(e);
    if (mode == ClippingMode::Layerwise) {
      // Whole-batch per-example gradients for this layer only.
      Tensor layer_grads({B, rows, cols});
      for (Index i = 0; i < B; ++i) {
        if (e.is_embedding)
          scatter_embedding(e.ids, i, e.g.slice(i), layer_grads.slice(i));
        else
          layer_grads.slice(i).noalias() = e.g.slice(i).transpose() * e.a.slice(i);
        norms.sq_norms(i) += layer_grads.slice(i).squaredNorm();
      }
    } else {
      const bool use_ghost = mode == ClippingMode::Ghost || ghost_cheaper(e.t, e.d, e.p);
      for (Index i = 0; i < B; ++i) {
        if (use_ghost) {
          if (e.is_embedding) {
            std::span<const std::int32_t> ids(e.ids.data() + i * e.t, static_cast<std::size_t>(e.t));
            norms.sq_norms(i) += ghost_norm_embedding(ids, e.d, e.g.slice(i));
          } else {
            norms.sq_norms(i) += ghost_norm_linear(e.a.slice(i), e.g.slice(i));
          }
        } else {
          Tensor grad_i({rows, cols});
          if (e.is_embedding)
            scatter_embedding(e.ids, i, e.g.slice(i), grad_i.mat());
          else
            grad_i.mat().noalias() = e.g.slice(i).transpose() * e.a.slice(i);
          norms.sq_norms(i) += grad_i.vec().squaredNorm();
        }
      }
    }
    if (e.has_bias)
      for (Index i = 0; i < B; ++i) norms.sq_norms(i) += bias_sq_norm(e.g.slice(i));
  }
  return norms;
}

ClipFactors clip_factors(const PerExampleNorms& norms, double clip_threshold) {
  if (!(clip_threshold > 0)) throw ValueError("clip_factors: threshold must be positive");
  ClipFactors f;
  f.c = Vector::Ones(norms.sq_norms.size());
  for (Index i = 0; i < norms.sq_norms.size(); ++i) {
    const double n = std::sqrt(norms.sq_norms(i));
    if (n > 0) f.c(i) = std::min(1.0, clip_threshold / n);
  }
  return f;
}

Tensor per_example_flat_grads(const ModelSpec& model, const LayerTape& tape) {
  check_tape(tape);
  const Index B = tape.batch;
  const Index P = model.param_count();
  const auto infos = model.layer_infos();
  if (infos.size() != tape.entries.size()) throw StateError("clipping: tape does not match the model layout");

  Tensor grads({B, P});
  for (std::size_t k = 0; k < infos.size(); ++k) {
    const auto& info = infos[k];
    const auto& e = tape.entries[k];
    const auto [rows, cols] = grad_block_shape(e);
    for (Index i = 0; i < B; ++i) {
      MatMap gw(grads.data() + i * P + info.w_offset, rows, cols);
      if (e.is_embedding)
        scatter_embedding(e.ids, i, e.g.slice(i), gw);
      else
        gw.noalias() = e.g.slice(i).transpose() * e.a.slice(i);
      if (info.has_bias) {
        VecMap gb(grads.data() + i * P + info.b_offset, info.out_dim);
        gb = e.g.slice(i).colwise().sum().transpose();
      }
    }
  }
  return grads;
}

Tensor clipped_grad_sum(const ModelSpec& model, const SeqBatch& batch, double clip_threshold, ClippingMode mode) {
  Forward f = forward(model, batch);
  LayerTape tape = backward_tape(model, std::move(f));
  return clipped_grad_sum(model, tape, clip_threshold, mode);
}

Tensor clipped_grad_sum(const ModelSpec& model, const LayerTape& tape, double clip_threshold, ClippingMode mode) {
  if (!(clip_threshold > 0)) throw ValueError("clipped_grad_sum: threshold must be positive");
  if (mode == ClippingMode::Naive) {
    // Single pass over the instantiated rows.
    const Tensor grads = per_example_flat_grads(model, tape);
    PerExampleNorms norms;
    norms.sq_norms = Vector(tape.batch);
    for (Index i = 0; i < tape.batch; ++i) norms.sq_norms(i) = grads.mat().row(i).squaredNorm();
    const ClipFactors factors = clip_factors(norms, clip_threshold);
    Tensor sum({model.param_count()});
    sum.vec().noalias() = grads.mat().transpose() * factors.c;
    return sum;
  }
  const PerExampleNorms norms = per_example_norms(tape, mode);
  const ClipFactors factors = clip_factors(norms, clip_threshold);
  return backward_weighted(model, tape, factors.c);
}

MemLedger mem_cost(const ModelSpec& model, Index batch, Index steps, ClippingMode mode) {
  if (batch <= 0 || steps <= 0) throw ValueError("mem_cost: batch and steps must be positive");
  const double B = static_cast<double>(batch);
  const Index T = steps;
  const Index F0 = model.feature_dim();
  const Index F = model.pooled_dim();
  const Index K = model.num_classes;
  const double P = static_cast<double>(model.param_count());

  MemLedger ledger;
  ledger.mode = mode;
  ledger.params = P;

  const auto infos = model.layer_infos();
  double naive_all = 0, layerwise_max = 0, ghost_max = 0, auto_max = 0;
  for (std::size_t k = 0; k < infos.size(); ++k) {
    const auto& info = infos[k];
    MemLedger::LayerRow row;
    row.name = info.name;
    row.t = (k + 1 == infos.size()) ? 1 : T;  // the head sees the pooled vector
    row.d = info.in_dim;
    row.p = info.out_dim;
    const double t2 = static_cast<double>(row.t) * static_cast<double>(row.t);
    const double pd = static_cast<double>(row.p) * static_cast<double>(row.d);
    row.naive_cost = B * pd;
    row.ghost_cost = 2.0 * B * t2;
    row.ghost_cheaper = 2.0 * t2 < pd;
    row.auto_cost = std::min(row.ghost_cost, row.naive_cost);
    row.ratio_half = pd / (2.0 * t2);
    row.ratio_full = pd / t2;

    const double bias = info.has_bias ? static_cast<double>(row.p) : 0.0;
    naive_all += B * (pd + bias);
    layerwise_max = std::max(layerwise_max, B * (pd + bias));
    ghost_max = std::max(ghost_max, 2.0 * t2);                                   // sequential over examples
    auto_max = std::max(auto_max, row.ghost_cheaper ? 2.0 * t2 : pd);            // sequential over examples
    ledger.layers.push_back(std::move(row));
  }

  // Tape: activations feeding each hidden layer, pre-pool features, pooled
  // head input, probs, and the recorded per-layer output gradients.  The
  // input features themselves are counted as the first hidden layer's input
  // (or as the pre-pool tensor when there are no hidden layers).
  double tape = 0;
  double max_dim = static_cast<double>(std::max({F0, F, K}));
  if (model.input == InputEncoding::Embedding) tape += B * T * F0;  // recorded embedding output gradient
  {
    Index prev = F0;
    for (const auto& l : model.hidden) {
      const Index p = l.weight.extent(0);
      tape += B * T * static_cast<double>(prev);  // layer input activations
      tape += B * T * static_cast<double>(p);     // recorded output gradient
      max_dim = std::max(max_dim, static_cast<double>(std::max(prev, p)));
      prev = p;
    }
  }
  tape += B * T * F;       // pre-pool features
  tape += B * F + B * K;   // head input (B,1,F) + head gradient (B,1,K)
  tape += B * K;           // probs
  ledger.tape_cost = tape;

  // Weighted backward: dlogits, du, the flat output, and the dx/ds/dprev
  // chain (three layer-sized buffers briefly coexist).
  ledger.pass2_cost = B * K + B * F + 3.0 * B * T * max_dim + P;

  switch (mode) {
    case ClippingMode::Naive:
      ledger.norms_extra = naive_all;     // equals B * param_count
      ledger.pass2_cost = naive_all + P;  // the rows stay live while being summed
      break;
    case ClippingMode::Layerwise:
      ledger.norms_extra = layerwise_max;
      break;
    case ClippingMode::Ghost:
      ledger.norms_extra = ghost_max;
      break;
    case ClippingMode::GhostAuto:
      ledger.norms_extra = auto_max;
      break;
  }
  ledger.peak_total = ledger.params + ledger.tape_cost + std::max(ledger.norms_extra, ledger.pass2_cost);
  return ledger;
}

double mem_cost_nonprivate(const ModelSpec& model, Index batch, Index steps) {
  const double B = static_cast<double>(batch);
  const Index T = steps;
  const Index F0 = model.feature_dim();
  const Index F = model.pooled_dim();
  const Index K = model.num_classes;

  double acts = B * T * F0;
  double max_dim = static_cast<double>(std::max({F0, F, K}));
  Index prev = F0;
  for (const auto& l : model.hidden) {
    const Index p = l.weight.extent(0);
    acts += B * T * static_cast<double>(p);
    max_dim = std::max(max_dim, static_cast<double>(std::max(prev, p)));
    prev = p;
  }
  acts += B * F + 2.0 * B * K;  // pooled, probs, head gradient
  const double backward = 3.0 * B * T * max_dim + B * F + static_cast<double>(model.param_count());
  return static_cast<double>(model.param_count()) + acts + backward;
}

}  // namespace dpgrad
