// Copyright (c) 2026 dpgrad authors
// SPDX-License-Identifier: Apache-2.0
#include "dpgrad/model.hpp"

#include <cmath>

namespace dpgrad {
namespace {

Tensor make_weight(Index out, Index in, SeededRng& rng) {
  Tensor w({out, in});
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (Index i = 0; i < w.size(); ++i) w(i) = scale * rng.normal();
  return w;
}

}  // namespace

ModelSpec ModelSpec::make(InputEncoding input, Index vocab, Index embed_dim, std::vector<Index> hidden_dims,
                          Index num_classes, bool bias, SeededRng& rng) {
  ModelSpec m;
  m.input = input;
  m.vocab = vocab;
  m.embed_dim = input == InputEncoding::Embedding ? embed_dim : vocab;
  m.num_classes = num_classes;
  if (input == InputEncoding::Embedding) m.embedding = make_weight(vocab, embed_dim, rng);
  Index prev = m.feature_dim();
  for (Index h : hidden_dims) {
    LinearLayer layer;
    layer.weight = make_weight(h, prev, rng);
    layer.has_bias = bias;
    if (bias) layer.bias = Tensor({h});
    m.hidden.push_back(std::move(layer));
    prev = h;
  }
  m.classifier.weight = make_weight(num_classes, prev, rng);
  m.classifier.has_bias = bias;
  if (bias) m.classifier.bias = Tensor({num_classes});
  m.check();
  return m;
}

Index ModelSpec::param_count() const {
  Index p = 0;
  if (input == InputEncoding::Embedding) p += vocab * embed_dim;
  for (const auto& l : hidden) p += l.weight.size() + (l.has_bias ? l.bias.size() : 0);
  p += classifier.weight.size() + (classifier.has_bias ? classifier.bias.size() : 0);
  return p;
}

std::vector<ModelSpec::LayerInfo> ModelSpec::layer_infos() const {
  std::vector<LayerInfo> infos;
  Index offset = 0;
  if (input == InputEncoding::Embedding) {
    infos.push_back({"embedding", true, false, vocab, embed_dim, offset, -1});
    offset += vocab * embed_dim;
  }
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& layer = hidden[l];
    LayerInfo info;
    info.name = "hidden" + std::to_string(l);
    info.has_bias = layer.has_bias;
    info.in_dim = layer.weight.extent(1);
    info.out_dim = layer.weight.extent(0);
    info.w_offset = offset;
    offset += layer.weight.size();
    if (layer.has_bias) {
      info.b_offset = offset;
      offset += layer.bias.size();
    }
    infos.push_back(std::move(info));
  }
  LayerInfo head;
  head.name = "classifier";
  head.has_bias = classifier.has_bias;
  head.in_dim = classifier.weight.extent(1);
  head.out_dim = classifier.weight.extent(0);
  head.w_offset = offset;
  if (classifier.has_bias) head.b_offset = offset + classifier.weight.size();
  infos.push_back(std::move(head));
  return infos;
}

Tensor ModelSpec::params_flat() const {
  Tensor flat({param_count()});
  Index off = 0;
  const auto copy_in = [&](const Tensor& t) {
    std::copy(t.data(), t.data() + t.size(), flat.data() + off);
    off += t.size();
  };
  if (input == InputEncoding::Embedding) copy_in(embedding);
  for (const auto& l : hidden) {
    copy_in(l.weight);
    if (l.has_bias) copy_in(l.bias);
  }
  copy_in(classifier.weight);
  if (classifier.has_bias) copy_in(classifier.bias);
  return flat;
}

void ModelSpec::set_params_flat(const Tensor& flat) {
  if (flat.size() != param_count()) throw ShapeError("set_params_flat: length does not match param_count");
  Index off = 0;
  const auto copy_out = [&](Tensor& t) {
    std::copy(flat.data() + off, flat.data() + off + t.size(), t.data());
    off += t.size();
  };
  if (input == InputEncoding::Embedding) copy_out(embedding);
  for (auto& l : hidden) {
    copy_out(l.weight);
    if (l.has_bias) copy_out(l.bias);
  }
  copy_out(classifier.weight);
  if (classifier.has_bias) copy_out(classifier.bias);
}

void ModelSpec::check() const {
  if (vocab <= 0 || num_classes <= 0) throw ShapeError("model: vocab and num_classes must be positive");
  if (input == InputEncoding::Embedding) {
    if (embedding.rank() != 2 || embedding.extent(0) != vocab || embedding.extent(1) != embed_dim)
      throw ShapeError("model: embedding table must be vocab x embed_dim");
  }
  Index prev = feature_dim();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& layer = hidden[l];
    if (layer.weight.rank() != 2 || layer.weight.extent(1) != prev)
      throw ShapeError("model: hidden layer " + std::to_string(l) + " input dim does not compose, expected " +
                       std::to_string(prev));
    if (layer.has_bias && layer.bias.size() != layer.weight.extent(0))
      throw ShapeError("model: hidden layer " + std::to_string(l) + " bias length mismatch");
    prev = layer.weight.extent(0);
  }
  if (classifier.weight.rank() != 2 || classifier.weight.extent(1) != prev)
    throw ShapeError("model: classifier input dim does not compose, expected " + std::to_string(prev));
  if (classifier.weight.extent(0) != num_classes) throw ShapeError("model: classifier output dim != num_classes");
  if (classifier.has_bias && classifier.bias.size() != num_classes)
    throw ShapeError("model: classifier bias length mismatch");
}

void ModelSpec::validate_batch(const SeqBatch& batch) const {
  if (batch.batch() <= 0 || batch.steps() <= 0) throw ShapeError("batch must have positive B and T");
  if (batch.labels.size() != batch.batch()) throw ShapeError("labels length does not match batch size");
  for (Index i = 0; i < batch.batch(); ++i) {
    for (Index t = 0; t < batch.steps(); ++t) {
      const auto id = batch.token_ids(i, t);
      if (id < 0 || id >= vocab)
        throw ValueError("token id out of range at (" + std::to_string(i) + ", " + std::to_string(t) +
                         "): " + std::to_string(id));
    }
    if (batch.labels(i) < 0 || batch.labels(i) >= num_classes)
      throw ValueError("label out of range at " + std::to_string(i) + ": " + std::to_string(batch.labels(i)));
  }
}

Forward forward(const ModelSpec& model, const SeqBatch& batch) {
  model.check();
  model.validate_batch(batch);
  const Index B = batch.batch(), T = batch.steps();
  const Index F0 = model.feature_dim();

  Forward f;
  f.model = &model;
  f.batch = B;
  f.steps = T;
  f.ids = batch.token_ids;
  f.labels = batch.labels;

  Tensor feat({B, T, F0});
  if (model.input == InputEncoding::Embedding) {
    auto table = model.embedding.mat();
    auto rows = feat.reshaped(B * T, F0);
    for (Index i = 0; i < B; ++i)
      for (Index t = 0; t < T; ++t) rows.row(i * T + t) = table.row(batch.token_ids(i, t));
  } else {
    for (Index i = 0; i < B; ++i)
      for (Index t = 0; t < T; ++t) feat(i, t, batch.token_ids(i, t)) = 1.0;
  }
  f.acts.push_back(std::move(feat));

  for (const auto& layer : model.hidden) {
    const Index d = layer.weight.extent(1), p = layer.weight.extent(0);
    Tensor out({B, T, p});
    auto om = out.reshaped(B * T, p);
    om.noalias() = f.acts.back().reshaped(B * T, d) * layer.weight.mat().transpose();
    if (layer.has_bias) om.rowwise() += layer.bias.vec().transpose();
    om.array() = om.array().tanh();
    f.acts.push_back(std::move(out));
  }

  const Index F = model.pooled_dim(), K = model.num_classes;
  f.pooled = Tensor({B, F});
  {
    auto src = f.acts.back().reshaped(B * T, F);
    for (Index i = 0; i < B; ++i) f.pooled.mat().row(i) = src.middleRows(i * T, T).colwise().mean();
  }

  f.probs = Tensor({B, K});
  f.losses = Vector(B);
  {
    auto logits = f.probs.mat();
    logits.noalias() = f.pooled.mat() * model.classifier.weight.mat().transpose();
    if (model.classifier.has_bias) logits.rowwise() += model.classifier.bias.vec().transpose();
    for (Index i = 0; i < B; ++i) {
      auto row = logits.row(i);
      const double mx = row.maxCoeff();
      const double lse = mx + std::log((row.array() - mx).exp().sum());
      f.losses(i) = lse - row(batch.labels(i));
      row = (row.array() - lse).exp();  // logits buffer becomes the softmax in place
    }
  }
  f.valid = true;
  return f;
}

namespace {

// Gradients the reverse sweep can hand back when recording a tape.
struct SweepRecord {
  Tensor head_g;            // (B, 1, K)
  std::vector<Tensor> ds;   // per hidden layer, (B, T, p)
  Tensor feature_g;         // (B, T, F0); gradient at the input features
};

// One reverse sweep of d(sum_i w_i L_i).  hidden_inputs[l] is the activation
// tensor feeding hidden layer l; pooled feeds the head.  When `grad` is set
// the aggregate flat gradient is accumulated (ids required for an embedding
// model); when `rec` is set the per-layer output gradients are kept.
void backward_sweep(const ModelSpec& model, const Tensor& probs, const IntVector& labels,
                    const std::vector<const Tensor*>& hidden_inputs, const Tensor& pooled, const Tensor& pre_pool,
                    const IntMatrix* ids, Index B, Index T, const Vector& w, SweepRecord* rec, Tensor* grad) {
  const Index F = model.pooled_dim(), K = model.num_classes;
  const auto infos = model.layer_infos();
  const bool embedded = model.input == InputEncoding::Embedding;
  const std::size_t first_linear = embedded ? 1 : 0;
  const Index L = static_cast<Index>(model.hidden.size());

  Tensor dlogits({B, 1, K});
  {
    auto dm = dlogits.reshaped(B, K);
    dm = probs.mat();
    for (Index i = 0; i < B; ++i) {
      dm(i, labels(i)) -= 1.0;
      dm.row(i) *= w(i);
    }
  }

  if (grad != nullptr) {
    const auto& info = infos.back();
    MatMap gw(grad->data() + info.w_offset, K, F);
    gw.noalias() += dlogits.reshaped(B, K).transpose() * pooled.reshaped(B, F);
    if (info.has_bias) {
      VecMap gb(grad->data() + info.b_offset, K);
      gb.noalias() += dlogits.reshaped(B, K).colwise().sum().transpose();
    }
  }

  // Un-pool: each timestep inherits du/T.
  Tensor dx({B, T, F});
  {
    Tensor du({B, F});
    du.mat().noalias() = dlogits.reshaped(B, K) * model.classifier.weight.mat();
    auto dm = dx.reshaped(B * T, F);
    for (Index i = 0; i < B; ++i) dm.middleRows(i * T, T).rowwise() = du.mat().row(i) / static_cast<double>(T);
  }
  if (rec != nullptr) rec->head_g = std::move(dlogits);
  if (rec != nullptr) rec->ds.resize(static_cast<std::size_t>(L));

  for (Index l = L - 1; l >= 0; --l) {
    const auto& layer = model.hidden[static_cast<std::size_t>(l)];
    const Index d = layer.weight.extent(1), p = layer.weight.extent(0);
    const Tensor& x_out = (l + 1 < L) ? *hidden_inputs[static_cast<std::size_t>(l) + 1] : pre_pool;
    Tensor ds({B, T, p});
    ds.vec().array() = dx.vec().array() * (1.0 - x_out.vec().array().square());

    const Tensor& a = *hidden_inputs[static_cast<std::size_t>(l)];
    if (grad != nullptr) {
      const auto& info = infos[first_linear + static_cast<std::size_t>(l)];
      MatMap gw(grad->data() + info.w_offset, p, d);
      gw.noalias() += ds.reshaped(B * T, p).transpose() * a.reshaped(B * T, d);
      if (info.has_bias) {
        VecMap gb(grad->data() + info.b_offset, p);
        gb.noalias() += ds.reshaped(B * T, p).colwise().sum().transpose();
      }
    }

    const bool need_dprev = embedded || l > 0;
    if (need_dprev) {
      Tensor dprev({B, T, d});
      dprev.reshaped(B * T, d).noalias() = ds.reshaped(B * T, p) * layer.weight.mat();
      dx = std::move(dprev);
    }
    if (rec != nullptr)
      rec->ds[static_cast<std::size_t>(l)] = std::move(ds);
  }

  if (embedded) {
    if (grad != nullptr) {
      const auto& info = infos[0];
      MatMap gemb(grad->data() + info.w_offset, model.vocab, model.embed_dim);
      auto rows = dx.reshaped(B * T, model.embed_dim);
      for (Index i = 0; i < B; ++i)
        for (Index t = 0; t < T; ++t) gemb.row((*ids)(i, t)) += rows.row(i * T + t);
    }
    if (rec != nullptr) rec->feature_g = std::move(dx);
  }
}

}  // namespace

LayerTape backward_tape(const ModelSpec& model, Forward&& fwd, double loss_scale) {
  if (!fwd.valid) throw StateError("backward_tape: no forward pass cached");
  if (fwd.model != &model) throw StateError("backward_tape: forward cache belongs to a different model");
  const Index B = fwd.batch, T = fwd.steps;
  const auto infos = model.layer_infos();
  const bool embedded = model.input == InputEncoding::Embedding;
  const std::size_t first_linear = embedded ? 1 : 0;

  LayerTape tape;
  tape.model = &model;
  tape.batch = B;
  tape.steps = T;
  tape.losses = fwd.losses;
  tape.labels = std::move(fwd.labels);
  tape.loss_scale = loss_scale;
  tape.entries.resize(infos.size());
  for (std::size_t k = 0; k < infos.size(); ++k) {
    auto& e = tape.entries[k];
    e.name = infos[k].name;
    e.is_embedding = infos[k].is_embedding;
    e.has_bias = infos[k].has_bias;
    e.d = infos[k].in_dim;
    e.p = infos[k].out_dim;
    e.t = (k + 1 == infos.size()) ? 1 : T;
  }
  if (embedded) tape.entries[0].ids = std::move(fwd.ids);

  // Adopt the forward activations: hidden layer l's input is acts[l]; the
  // last activation feeds the pool.
  tape.pre_pool = std::move(fwd.acts.back());
  fwd.acts.pop_back();
  for (std::size_t l = 0; l < model.hidden.size(); ++l) tape.entries[first_linear + l].a = std::move(fwd.acts[l]);
  tape.probs = std::move(fwd.probs);

  // The head's input is the pooled feature vector: a sequence of length one.
  Tensor pooled = std::move(fwd.pooled);
  pooled.reshape({B, 1, model.pooled_dim()});
  tape.entries.back().a = std::move(pooled);

  std::vector<const Tensor*> hidden_inputs;
  for (std::size_t l = 0; l < model.hidden.size(); ++l) hidden_inputs.push_back(&tape.entries[first_linear + l].a);

  const Vector w = Vector::Constant(B, loss_scale);
  SweepRecord rec;
  backward_sweep(model, tape.probs, tape.labels, hidden_inputs, tape.entries.back().a, tape.pre_pool,
                 embedded ? &tape.entries[0].ids : nullptr, B, T, w, &rec, nullptr);

  tape.entries.back().g = std::move(rec.head_g);
  for (std::size_t l = 0; l < model.hidden.size(); ++l) tape.entries[first_linear + l].g = std::move(rec.ds[l]);
  if (embedded) tape.entries[0].g = std::move(rec.feature_g);

  fwd.valid = false;
  fwd.acts.clear();
  tape.valid = true;
  return tape;
}

Tensor backward_weighted(const ModelSpec& model, const LayerTape& tape, const Vector& weights) {
  if (!tape.valid) throw StateError("backward_weighted: tape not built");
  if (tape.model != &model) throw StateError("backward_weighted: tape belongs to a different model");
  if (weights.size() != tape.batch)
    throw ShapeError("backward_weighted: weight length " + std::to_string(weights.size()) +
                     " does not match batch size " + std::to_string(tape.batch));
  for (Index i = 0; i < weights.size(); ++i)
    if (!std::isfinite(weights(i))) throw ValueError("backward_weighted: weights must be finite");

  const bool embedded = model.input == InputEncoding::Embedding;
  const std::size_t first_linear = embedded ? 1 : 0;
  std::vector<const Tensor*> hidden_inputs;
  for (std::size_t l = 0; l < model.hidden.size(); ++l) hidden_inputs.push_back(&tape.entries[first_linear + l].a);

  Tensor grad({model.param_count()});
  backward_sweep(model, tape.probs, tape.labels, hidden_inputs, tape.entries.back().a, tape.pre_pool,
                 embedded ? &tape.entries[0].ids : nullptr, tape.batch, tape.steps, weights, nullptr, &grad);
  return grad;
}

Tensor backward_weighted(const ModelSpec& model, const SeqBatch& batch, const Vector& weights) {
  Forward f = forward(model, batch);
  LayerTape tape = backward_tape(model, std::move(f));
  return backward_weighted(model, tape, weights);
}

Tensor backward_aggregate(const ModelSpec& model, const Forward& fwd, const Vector& weights) {
  if (!fwd.valid) throw StateError("backward_aggregate: no forward pass cached");
  if (fwd.model != &model) throw StateError("backward_aggregate: forward cache belongs to a different model");
  if (weights.size() != fwd.batch) throw ShapeError("backward_aggregate: weight length does not match batch size");

  std::vector<const Tensor*> hidden_inputs;
  for (std::size_t l = 0; l < model.hidden.size(); ++l) hidden_inputs.push_back(&fwd.acts[l]);

  Tensor grad({model.param_count()});
  backward_sweep(model, fwd.probs, fwd.labels, hidden_inputs, fwd.pooled, fwd.acts.back(),
                 model.input == InputEncoding::Embedding ? &fwd.ids : nullptr, fwd.batch, fwd.steps, weights,
                 nullptr, &grad);
  return grad;
}

Matrix per_example_grad_linear(Eigen::Ref<const Matrix> a, Eigen::Ref<const Matrix> g) {
  if (a.rows() != g.rows())
    throw ShapeError("per_example_grad_linear: time extents differ: " + std::to_string(a.rows()) + " vs " +
                     std::to_string(g.rows()));
  return g.transpose() * a;
}

}  // namespace dpgrad
