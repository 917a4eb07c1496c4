#ifndef MILMIX_MODELS_HPP
#define MILMIX_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "milmix/bag.hpp"
#include "milmix/nn.hpp"

namespace milmix {

enum class ModelKind { kAbmil, kDsmil };

ModelKind parse_model_kind(const std::string& text);
const char* to_string(ModelKind kind);

inline constexpr std::size_t kAttentionHidden = 128;  // H
inline constexpr std::size_t kQueryDim = 128;         // Q
inline constexpr double kStreamWeight = 0.5;          // lambda

// ---------------------------------------------------------------------------
// Gated-attention embedding head.
//
// a_i = softmax_i( w^T (tanh(V x_i) . sigmoid(U x_i)) )
// z   = sum_i a_i x_i
// p   = softmax(classifier(z))

template <typename T>
struct AbmilModel {
  DenseLayer<T> attn_v;      // D -> H
  DenseLayer<T> attn_u;      // D -> H
  std::vector<T> attn_w;     // H
  DenseLayer<T> classifier;  // D -> C
};

/// Forward outputs plus the cached intermediates the backward pass needs.
template <typename T>
struct AbmilForward {
  std::vector<T> class_probs;  // C
  std::vector<T> attention;    // P, sums to 1
  Matrix<T> gate_tanh;         // P x H
  Matrix<T> gate_sigmoid;      // P x H
  std::vector<T> scores;       // P, pre-softmax attention logits
  std::vector<T> pooled;       // D
  std::vector<T> logits;       // C
};

// ---------------------------------------------------------------------------
// Dual-stream head: an instance stream scores every patch per class; the
// highest-scoring (critical) instance anchors a query attention over value
// projections, giving a per-class bag embedding. Bag and max-instance logits
// are merged by weighted addition for prediction; the loss averages the two
// streams.

template <typename T>
struct DsmilModel {
  DenseLayer<T> inst_classifier;  // D -> C
  DenseLayer<T> query;            // D -> Q
  DenseLayer<T> value;            // D -> D
  DenseLayer<T> bag_classifier;   // D -> C
  T stream_weight = T(kStreamWeight);
};

template <typename T>
struct DsmilForward {
  Matrix<T> instance_probs;       // P x C, per-instance softmax
  std::vector<T> fused_probs;     // C
  Matrix<T> attention;            // C x P, each row sums to 1
  Matrix<T> instance_scores;      // P x C, raw s_{i,c}
  std::vector<std::size_t> critical;  // C, argmax_i s_{i,c}, ties lowest index
  Matrix<T> queries;              // P x Q
  Matrix<T> values;               // P x D
  Matrix<T> embeddings;           // C x D
  std::vector<T> bag_logits;      // C
  std::vector<T> instance_logits; // C, max-instance logits
  std::vector<T> fused_logits;    // C
};

using MilModel = std::variant<AbmilModel<float>, DsmilModel<float>>;

ModelKind kind_of(const MilModel& model);

/// Fresh model with uniform Glorot-style weights. H = Q = 128, lambda = 0.5.
MilModel init_model(ModelKind kind, std::size_t dim, std::size_t classes, RngStream& rng);

// ---------------------------------------------------------------------------
// Forward passes.

template <typename T>
AbmilForward<T> abmil_forward(const AbmilModel<T>& model, const Matrix<T>& features) {
  const std::size_t patches = features.rows();
  const std::size_t hidden = model.attn_w.size();
  if (features.cols() != model.attn_v.in_dim()) {
    throw ValidationError("abmil_forward: descriptor dimension mismatch");
  }

  AbmilForward<T> out;
  out.gate_tanh = Matrix<T>(patches, hidden);
  out.gate_sigmoid = Matrix<T>(patches, hidden);
  out.scores.resize(patches);
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    const auto pre_v = affine(model.attn_v, x);
    const auto pre_u = affine(model.attn_u, x);
    T score = T(0);
    for (std::size_t hh = 0; hh < hidden; ++hh) {
      const T t = std::tanh(pre_v[hh]);
      const T s = T(1) / (T(1) + std::exp(-pre_u[hh]));
      out.gate_tanh(i, hh) = t;
      out.gate_sigmoid(i, hh) = s;
      score += model.attn_w[hh] * t * s;
    }
    out.scores[i] = score;
  }
  out.attention = softmax<T>(out.scores);

  out.pooled.assign(features.cols(), T(0));
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    const T a = out.attention[i];
    for (std::size_t d = 0; d < x.size(); ++d) out.pooled[d] += a * x[d];
  }
  out.logits = affine(model.classifier, std::span<const T>(out.pooled));
  out.class_probs = softmax<T>(out.logits);
  return out;
}

template <typename T>
DsmilForward<T> dsmil_forward(const DsmilModel<T>& model, const Matrix<T>& features) {
  const std::size_t patches = features.rows();
  const std::size_t classes = model.inst_classifier.out_dim();
  const std::size_t dim = features.cols();
  if (dim != model.inst_classifier.in_dim()) {
    throw ValidationError("dsmil_forward: descriptor dimension mismatch");
  }

  DsmilForward<T> out;
  out.instance_scores = Matrix<T>(patches, classes);
  out.instance_probs = Matrix<T>(patches, classes);
  out.queries = Matrix<T>(patches, model.query.out_dim());
  out.values = Matrix<T>(patches, model.value.out_dim());
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    const auto scores = affine(model.inst_classifier, x);
    std::copy(scores.begin(), scores.end(), out.instance_scores.row(i).begin());
    const auto probs = softmax<T>(std::span<const T>(scores));
    std::copy(probs.begin(), probs.end(), out.instance_probs.row(i).begin());
    const auto q = affine(model.query, x);
    std::copy(q.begin(), q.end(), out.queries.row(i).begin());
    const auto v = affine(model.value, x);
    std::copy(v.begin(), v.end(), out.values.row(i).begin());
  }

  out.critical.resize(classes);
  out.instance_logits.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < patches; ++i) {
      if (out.instance_scores(i, c) > out.instance_scores(best, c)) best = i;
    }
    out.critical[c] = best;
    out.instance_logits[c] = out.instance_scores(best, c);
  }

  out.attention = Matrix<T>(classes, patches);
  out.embeddings = Matrix<T>(classes, dim);
  out.bag_logits.resize(classes);
  std::vector<T> similarity(patches);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto q_crit = out.queries.row(out.critical[c]);
    for (std::size_t i = 0; i < patches; ++i) {
      const auto q = out.queries.row(i);
      T dot = T(0);
      for (std::size_t k = 0; k < q.size(); ++k) dot += q[k] * q_crit[k];
      similarity[i] = dot;
    }
    const auto attn = softmax<T>(std::span<const T>(similarity));
    std::copy(attn.begin(), attn.end(), out.attention.row(c).begin());
    auto emb = out.embeddings.row(c);
    for (std::size_t i = 0; i < patches; ++i) {
      const auto v = out.values.row(i);
      for (std::size_t d = 0; d < dim; ++d) emb[d] += attn[i] * v[d];
    }
    // Per-class bag logit: row c of the bag classifier applied to embedding c.
    const auto wrow = model.bag_classifier.weight.row(c);
    T logit = model.bag_classifier.bias[c];
    for (std::size_t d = 0; d < dim; ++d) logit += wrow[d] * emb[d];
    out.bag_logits[c] = logit;
  }

  out.fused_logits.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    out.fused_logits[c] = model.stream_weight * out.bag_logits[c] +
                          (T(1) - model.stream_weight) * out.instance_logits[c];
  }
  out.fused_probs = softmax<T>(std::span<const T>(out.fused_logits));
  return out;
}

// ---------------------------------------------------------------------------
// Losses and exact backward passes. Gradients accumulate into a model-shaped
// struct so the optimizer can walk parameters and gradients in lockstep.

template <typename T>
T abmil_loss(const AbmilForward<T>& fwd, std::span<const T> target) {
  return soft_cross_entropy<T>(fwd.class_probs, target);
}

/// 0.5 * CE(softmax(bag logits)) + 0.5 * CE(softmax(max-instance logits)).
template <typename T>
T dsmil_loss(const DsmilForward<T>& fwd, std::span<const T> target) {
  const auto bag_probs = softmax<T>(std::span<const T>(fwd.bag_logits));
  const auto inst_probs = softmax<T>(std::span<const T>(fwd.instance_logits));
  return T(0.5) * soft_cross_entropy<T>(bag_probs, target) +
         T(0.5) * soft_cross_entropy<T>(inst_probs, target);
}

template <typename T>
AbmilModel<T> zero_grads(const AbmilModel<T>& model) {
  AbmilModel<T> g;
  g.attn_v = zeros_like(model.attn_v);
  g.attn_u = zeros_like(model.attn_u);
  g.attn_w.assign(model.attn_w.size(), T(0));
  g.classifier = zeros_like(model.classifier);
  return g;
}

template <typename T>
DsmilModel<T> zero_grads(const DsmilModel<T>& model) {
  DsmilModel<T> g;
  g.inst_classifier = zeros_like(model.inst_classifier);
  g.query = zeros_like(model.query);
  g.value = zeros_like(model.value);
  g.bag_classifier = zeros_like(model.bag_classifier);
  g.stream_weight = T(0);
  return g;
}

template <typename T>
AbmilModel<T> abmil_backward(const AbmilModel<T>& model, const Matrix<T>& features,
                             const AbmilForward<T>& fwd, std::span<const T> target) {
  const std::size_t patches = features.rows();
  const std::size_t dim = features.cols();
  const std::size_t hidden = model.attn_w.size();
  AbmilModel<T> grads = zero_grads(model);

  const auto d_logits = softmax_cross_entropy_grad<T>(fwd.class_probs, target);
  std::vector<T> d_pooled(dim, T(0));
  affine_backward<T>(model.classifier, fwd.pooled, d_logits, grads.classifier,
                     std::span<T>(d_pooled));

  // Through the attention-weighted pooling and the softmax.
  std::vector<T> d_attention(patches);
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    T acc = T(0);
    for (std::size_t d = 0; d < dim; ++d) acc += d_pooled[d] * x[d];
    d_attention[i] = acc;
  }
  T weighted = T(0);
  for (std::size_t i = 0; i < patches; ++i) weighted += fwd.attention[i] * d_attention[i];
  std::vector<T> d_score(patches);
  for (std::size_t i = 0; i < patches; ++i) {
    d_score[i] = fwd.attention[i] * (d_attention[i] - weighted);
  }

  std::vector<T> d_pre_v(hidden), d_pre_u(hidden);
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    const auto gt = fwd.gate_tanh.row(i);
    const auto gs = fwd.gate_sigmoid.row(i);
    for (std::size_t hh = 0; hh < hidden; ++hh) {
      const T dg = d_score[i] * model.attn_w[hh];
      grads.attn_w[hh] += d_score[i] * gt[hh] * gs[hh];
      d_pre_v[hh] = dg * gs[hh] * (T(1) - gt[hh] * gt[hh]);
      d_pre_u[hh] = dg * gt[hh] * gs[hh] * (T(1) - gs[hh]);
    }
    affine_backward<T>(model.attn_v, x, d_pre_v, grads.attn_v);
    affine_backward<T>(model.attn_u, x, d_pre_u, grads.attn_u);
  }
  return grads;
}

template <typename T>
DsmilModel<T> dsmil_backward(const DsmilModel<T>& model, const Matrix<T>& features,
                             const DsmilForward<T>& fwd, std::span<const T> target) {
  const std::size_t patches = features.rows();
  const std::size_t classes = model.inst_classifier.out_dim();
  const std::size_t dim = features.cols();
  DsmilModel<T> grads = zero_grads(model);

  const auto bag_probs = softmax<T>(std::span<const T>(fwd.bag_logits));
  const auto inst_probs = softmax<T>(std::span<const T>(fwd.instance_logits));
  std::vector<T> d_bag_logits(classes), d_inst_logits(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    d_bag_logits[c] = T(0.5) * (bag_probs[c] - target[c]);
    d_inst_logits[c] = T(0.5) * (inst_probs[c] - target[c]);
  }

  // Instance stream: the max-instance logit for class c touches only row c of
  // the instance classifier, evaluated at the critical patch (argmax frozen).
  for (std::size_t c = 0; c < classes; ++c) {
    const auto x = features.row(fwd.critical[c]);
    auto wrow = grads.inst_classifier.weight.row(c);
    for (std::size_t d = 0; d < dim; ++d) wrow[d] += d_inst_logits[c] * x[d];
    grads.inst_classifier.bias[c] += d_inst_logits[c];
  }

  // Bag stream.
  Matrix<T> d_values(patches, dim);
  Matrix<T> d_queries(patches, model.query.out_dim());
  std::vector<T> d_embedding(dim);
  std::vector<T> d_attention(patches), d_similarity(patches);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto emb = fwd.embeddings.row(c);
    const auto wrow_model = model.bag_classifier.weight.row(c);
    auto wrow_grad = grads.bag_classifier.weight.row(c);
    for (std::size_t d = 0; d < dim; ++d) {
      wrow_grad[d] += d_bag_logits[c] * emb[d];
      d_embedding[d] = d_bag_logits[c] * wrow_model[d];
    }
    grads.bag_classifier.bias[c] += d_bag_logits[c];

    const auto attn = fwd.attention.row(c);
    T weighted = T(0);
    for (std::size_t i = 0; i < patches; ++i) {
      const auto v = fwd.values.row(i);
      T acc = T(0);
      for (std::size_t d = 0; d < dim; ++d) {
        acc += d_embedding[d] * v[d];
        d_values(i, d) += attn[i] * d_embedding[d];
      }
      d_attention[i] = acc;
      weighted += attn[i] * acc;
    }
    for (std::size_t i = 0; i < patches; ++i) {
      d_similarity[i] = attn[i] * (d_attention[i] - weighted);
    }
    const std::size_t crit = fwd.critical[c];
    const auto q_crit = fwd.queries.row(crit);
    auto dq_crit = d_queries.row(crit);
    for (std::size_t i = 0; i < patches; ++i) {
      const auto q = fwd.queries.row(i);
      auto dq = d_queries.row(i);
      for (std::size_t k = 0; k < q.size(); ++k) {
        dq[k] += d_similarity[i] * q_crit[k];
        dq_crit[k] += d_similarity[i] * q[k];
      }
    }
  }
  for (std::size_t i = 0; i < patches; ++i) {
    const auto x = features.row(i);
    affine_backward<T>(model.value, x, d_values.row(i), grads.value);
    affine_backward<T>(model.query, x, d_queries.row(i), grads.query);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Parameter traversal: a single visitation order shared by the optimizer, the
// checkpoint codec and the gradient checker. fn(name, tensor) receives
// Matrix<T>& or std::vector<T>&.

template <typename Model, typename Fn>
void visit_params(Model& model, Fn&& fn);

template <typename T, typename Fn>
void visit_abmil_params(T& m, Fn&& fn) {
  fn("attn_v.weight", m.attn_v.weight);
  fn("attn_v.bias", m.attn_v.bias);
  fn("attn_u.weight", m.attn_u.weight);
  fn("attn_u.bias", m.attn_u.bias);
  fn("attn_w", m.attn_w);
  fn("classifier.weight", m.classifier.weight);
  fn("classifier.bias", m.classifier.bias);
}

template <typename T, typename Fn>
void visit_dsmil_params(T& m, Fn&& fn) {
  fn("inst_classifier.weight", m.inst_classifier.weight);
  fn("inst_classifier.bias", m.inst_classifier.bias);
  fn("query.weight", m.query.weight);
  fn("query.bias", m.query.bias);
  fn("value.weight", m.value.weight);
  fn("value.bias", m.value.bias);
  fn("bag_classifier.weight", m.bag_classifier.weight);
  fn("bag_classifier.bias", m.bag_classifier.bias);
}

template <typename T, typename Fn>
void visit_params(AbmilModel<T>& m, Fn&& fn) { visit_abmil_params(m, fn); }
template <typename T, typename Fn>
void visit_params(const AbmilModel<T>& m, Fn&& fn) { visit_abmil_params(m, fn); }
template <typename T, typename Fn>
void visit_params(DsmilModel<T>& m, Fn&& fn) { visit_dsmil_params(m, fn); }
template <typename T, typename Fn>
void visit_params(const DsmilModel<T>& m, Fn&& fn) { visit_dsmil_params(m, fn); }

template <typename Model>
std::vector<std::span<float>> param_spans(Model& model) {
  std::vector<std::span<float>> spans;
  visit_params(model, [&](const char*, auto& tensor) { spans.push_back(span_of(tensor)); });
  return spans;
}

template <typename Model>
std::vector<std::span<const float>> param_spans(const Model& model) {
  std::vector<std::span<const float>> spans;
  visit_params(model, [&](const char*, const auto& tensor) { spans.push_back(span_of(tensor)); });
  return spans;
}

template <typename To, typename From>
AbmilModel<To> cast_model(const AbmilModel<From>& m) {
  AbmilModel<To> out;
  out.attn_v = cast_dense<To>(m.attn_v);
  out.attn_u = cast_dense<To>(m.attn_u);
  out.attn_w.resize(m.attn_w.size());
  for (std::size_t i = 0; i < m.attn_w.size(); ++i) out.attn_w[i] = static_cast<To>(m.attn_w[i]);
  out.classifier = cast_dense<To>(m.classifier);
  return out;
}

template <typename To, typename From>
DsmilModel<To> cast_model(const DsmilModel<From>& m) {
  DsmilModel<To> out;
  out.inst_classifier = cast_dense<To>(m.inst_classifier);
  out.query = cast_dense<To>(m.query);
  out.value = cast_dense<To>(m.value);
  out.bag_classifier = cast_dense<To>(m.bag_classifier);
  out.stream_weight = static_cast<To>(m.stream_weight);
  return out;
}

// ---------------------------------------------------------------------------
// Shared entry points used by the harness.

template <typename T>
Matrix<T> features_as(const FeatureBag& bag) {
  Matrix<T> out(bag.features.rows(), bag.features.cols());
  for (std::size_t i = 0; i < bag.features.data().size(); ++i) {
    out.data()[i] = static_cast<T>(bag.features.data()[i]);
  }
  return out;
}

struct Prediction {
  std::size_t class_index = 0;
  double probability = 0.0;
};

/// Argmax of class_probs (abmil) or fused_probs (dsmil); ties to lowest index.
Prediction predict(const MilModel& model, const FeatureBag& bag);

/// Loss of one bag under the matching head.
double mil_loss(const MilModel& model, const FeatureBag& bag);

/// Forward + backward + loss; gradients are written into *grads (model-shaped).
double mil_loss_and_grads(const MilModel& model, const FeatureBag& bag, MilModel* grads);

}  // namespace milmix

#endif  // MILMIX_MODELS_HPP
