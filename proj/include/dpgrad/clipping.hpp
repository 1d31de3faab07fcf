// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpgrad/model.hpp"

namespace dpgrad {

/// How per-example gradient norms (and the clipped sum) are computed.
///  - Naive: instantiate every example's full flat gradient at once.
///  - Layerwise: instantiate per-example gradients for one layer at a time.
///  - Ghost: per-layer squared norms from the two T x T Gram matrices; the
///    per-example gradient itself is never formed.
///  - GhostAuto: per layer, the cheaper of the ghost path (2T^2 transient
///    reals per example) and the direct path (p*d per example).
enum class ClippingMode { Naive, Layerwise, Ghost, GhostAuto };

const char* to_string(ClippingMode mode);
ClippingMode clipping_mode_from_string(const std::string& name);

/// Squared Frobenius norm of g^T a computed from the Gram matrices
/// a a^T and g g^T only: vec(a a^T)^T vec(g g^T).  a is t x d, g is t x p.
double ghost_norm_linear(Eigen::Ref<const Matrix> a, Eigen::Ref<const Matrix> g);

/// Embedding-layer squared norm via the Boolean Gram (a a^T)_{st} =
/// [ids_s == ids_t]; equivalent to ghost_norm_linear on one-hot rows but no
/// vocab-sized tensor is formed.
double ghost_norm_embedding(std::span<const std::int32_t> ids, Index vocab, Eigen::Ref<const Matrix> g);

/// Squared global per-example gradient norms, summed across layers (bias
/// terms included).  All modes produce the same values.
struct PerExampleNorms {
  Vector sq_norms;
};

PerExampleNorms per_example_norms(const LayerTape& tape, ClippingMode mode);

struct ClipFactors {
  Vector c;  // each in (0, 1]; c_i = 1 exactly when the norm is within C
};

/// c_i = min(1, C / ||grad_i||); zero-norm examples get c_i = 1.
ClipFactors clip_factors(const PerExampleNorms& norms, double clip_threshold);

/// The naive instantiation: one flat gradient row per example, shape (B, P).
Tensor per_example_flat_grads(const ModelSpec& model, const LayerTape& tape);

/// Sum of clipped per-example gradients.  Naive mode clips and sums the
/// instantiated rows directly; the other modes take norms in pass one and run
/// a second backward pass with the reweighted loss sum_i c_i L_i.
Tensor clipped_grad_sum(const ModelSpec& model, const SeqBatch& batch, double clip_threshold, ClippingMode mode);
Tensor clipped_grad_sum(const ModelSpec& model, const LayerTape& tape, double clip_threshold, ClippingMode mode);

/// Analytic memory model for the norm computation, in 64-bit reals.  The
/// per-layer naive/ghost columns are the complexity formulas B*p*d and
/// 2*B*t^2; peak_total models this engine's actual allocation pattern (ghost
/// and auto walk examples sequentially, so their transient does not scale
/// with B).
struct MemLedger {
  struct LayerRow {
    std::string name;
    Index t = 0, d = 0, p = 0;
    double naive_cost = 0;   // B * p * d
    double ghost_cost = 0;   // 2 * B * t^2
    double auto_cost = 0;    // per-layer min of the two
    bool ghost_cheaper = false;
    double ratio_half = 0;   // p*d / (2 t^2)
    double ratio_full = 0;   // p*d / t^2
  };

  ClippingMode mode = ClippingMode::Ghost;
  std::vector<LayerRow> layers;
  double params = 0;        // model parameters
  double tape_cost = 0;     // activations, recorded gradients, probs
  double pass2_cost = 0;    // reweighted-backward transients + flat gradient
  double norms_extra = 0;   // strategy-dependent transient of the norm pass
  double peak_total = 0;    // params + tape + max(norms_extra, pass2_cost)
};

MemLedger mem_cost(const ModelSpec& model, Index batch, Index steps, ClippingMode mode);

/// Peak model (same units) for plain non-private training: forward
/// activations plus one aggregate backward.
double mem_cost_nonprivate(const ModelSpec& model, Index batch, Index steps);

}  // namespace dpgrad
