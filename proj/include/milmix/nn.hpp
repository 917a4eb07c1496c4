#ifndef MILMIX_NN_HPP
#define MILMIX_NN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "milmix/errors.hpp"
#include "milmix/matrix.hpp"
#include "milmix/rng.hpp"

namespace milmix {

// Minimal numerical kernel for the MIL heads. Training runs in f32; the
// gradient checker re-instantiates the same templates in f64.

template <typename T>
struct DenseLayer {
  Matrix<T> weight;       // out x in
  std::vector<T> bias;    // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// weight * x + bias.
template <typename T>
std::vector<T> affine(const DenseLayer<T>& layer, std::span<const T> x) {
  if (x.size() != layer.in_dim()) throw ValidationError("affine: input size mismatch");
  std::vector<T> y(layer.out_dim());
  for (std::size_t r = 0; r < layer.out_dim(); ++r) {
    const auto row = layer.weight.row(r);
    T acc = layer.bias[r];
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// Accumulates d_weight += g x^T and d_bias += g; writes weight^T g into dx
/// when dx is non-empty.
template <typename T>
void affine_backward(const DenseLayer<T>& layer, std::span<const T> x, std::span<const T> g,
                     DenseLayer<T>& grads, std::span<T> dx = {}) {
  if (x.size() != layer.in_dim() || g.size() != layer.out_dim()) {
    throw ValidationError("affine_backward: shape mismatch");
  }
  for (std::size_t r = 0; r < layer.out_dim(); ++r) {
    const T gr = g[r];
    auto wrow = grads.weight.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) wrow[c] += gr * x[c];
    grads.bias[r] += gr;
  }
  if (!dx.empty()) {
    if (dx.size() != x.size()) throw ValidationError("affine_backward: dx size mismatch");
    for (std::size_t c = 0; c < x.size(); ++c) {
      T acc = T(0);
      for (std::size_t r = 0; r < layer.out_dim(); ++r) acc += layer.weight(r, c) * g[r];
      dx[c] += acc;
    }
  }
}

enum class Activation { kRelu, kTanh, kSigmoid };

template <typename T>
T apply_activation(Activation kind, T x) {
  switch (kind) {
    case Activation::kRelu: return x > T(0) ? x : T(0);
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSigmoid: return T(1) / (T(1) + std::exp(-x));
  }
  return x;
}

template <typename T>
std::vector<T> activation(std::span<const T> x, Activation kind) {
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = apply_activation(kind, x[i]);
  return y;
}

/// Derivative expressed through the activation output y.
template <typename T>
T activation_derivative(Activation kind, T y) {
  switch (kind) {
    case Activation::kRelu: return y > T(0) ? T(1) : T(0);
    case Activation::kTanh: return T(1) - y * y;
    case Activation::kSigmoid: return y * (T(1) - y);
  }
  return T(1);
}

/// Max-subtracted softmax; output is positive and sums to 1.
template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  T top = z[0];
  for (const T v : z) top = std::max(top, v);
  std::vector<T> out(z.size());
  T total = T(0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - top);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

inline constexpr double kLogClamp = 1e-12;

/// -sum_c target_c * ln(probs_c), probs clamped to >= 1e-12 before the log.
template <typename T>
T soft_cross_entropy(std::span<const T> probs, std::span<const T> target) {
  if (probs.size() != target.size()) {
    throw ValidationError("soft_cross_entropy: length mismatch");
  }
  T loss = T(0);
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const T p = std::max(probs[c], static_cast<T>(kLogClamp));
    loss -= target[c] * std::log(p);
  }
  return loss;
}

/// Gradient of soft_cross_entropy(softmax(logits), target) w.r.t. the logits.
template <typename T>
std::vector<T> softmax_cross_entropy_grad(std::span<const T> probs, std::span<const T> target) {
  std::vector<T> g(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) g[c] = probs[c] - target[c];
  return g;
}

struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

/// Standard Adam with bias correction; one call is one optimizer step over the
/// whole flat parameter list. Moment buffers are lazily shaped on first use.
void adam_update(const std::vector<std::span<float>>& params,
                 const std::vector<std::span<const float>>& grads, AdamState& state);

/// Central finite differences around params (fourth-order stencil,
/// (f(-2h) - 8f(-h) + 8f(h) - f(2h)) / 12h); returns the max over parameters
/// of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<double(std::span<const double>)>& loss_fn,
                  std::span<const double> params, std::span<const double> analytic_grad,
                  double h);

/// Uniform Glorot-style init in +/- sqrt(6 / (in + out)); biases zero.
/// Weights are drawn row-major.
template <typename T>
DenseLayer<T> init_dense(std::size_t out_dim, std::size_t in_dim, RngStream& rng) {
  DenseLayer<T> layer;
  layer.weight = Matrix<T>(out_dim, in_dim);
  layer.bias.assign(out_dim, T(0));
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (auto& w : layer.weight.data()) {
    w = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  }
  return layer;
}

template <typename T>
DenseLayer<T> zeros_like(const DenseLayer<T>& layer) {
  DenseLayer<T> out;
  out.weight = Matrix<T>(layer.weight.rows(), layer.weight.cols());
  out.bias.assign(layer.bias.size(), T(0));
  return out;
}

template <typename To, typename From>
DenseLayer<To> cast_dense(const DenseLayer<From>& layer) {
  DenseLayer<To> out;
  out.weight = Matrix<To>(layer.weight.rows(), layer.weight.cols());
  for (std::size_t i = 0; i < layer.weight.data().size(); ++i) {
    out.weight.data()[i] = static_cast<To>(layer.weight.data()[i]);
  }
  out.bias.resize(layer.bias.size());
  for (std::size_t i = 0; i < layer.bias.size(); ++i) {
    out.bias[i] = static_cast<To>(layer.bias[i]);
  }
  return out;
}

}  // namespace milmix

#endif  // MILMIX_NN_HPP
