#include "milmix/nn.hpp"

#include <cmath>

namespace milmix {

void adam_update(const std::vector<std::span<float>>& params,
                 const std::vector<std::span<const float>>& grads, AdamState& state) {
  if (params.size() != grads.size()) throw ValidationError("adam_update: tensor count mismatch");
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.first_moment[k].assign(params[k].size(), 0.0f);
      state.second_moment[k].assign(params[k].size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ValidationError("adam_update: state does not match parameter list");
  }

  state.step_count += 1;
  const auto lr = static_cast<float>(state.lr);
  const auto beta1 = static_cast<float>(state.beta1);
  const auto beta2 = static_cast<float>(state.beta2);
  const auto eps = static_cast<float>(state.eps);
  const auto correction1 =
      static_cast<float>(1.0 - std::pow(state.beta1, static_cast<double>(state.step_count)));
  const auto correction2 =
      static_cast<float>(1.0 - std::pow(state.beta2, static_cast<double>(state.step_count)));

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    if (p.size() != g.size() || p.size() != state.first_moment[k].size()) {
      throw ValidationError("adam_update: shape mismatch in tensor " + std::to_string(k));
    }
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
      const float m_hat = m[i] / correction1;
      const float v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

double grad_check(const std::function<double(std::span<const double>)>& loss_fn,
                  std::span<const double> params, std::span<const double> analytic_grad,
                  double h) {
  if (params.size() != analytic_grad.size()) {
    throw ValidationError("grad_check: gradient length mismatch");
  }
  std::vector<double> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    double f[4];
    const double offsets[4] = {-2.0 * h, -h, h, 2.0 * h};
    for (int k = 0; k < 4; ++k) {
      probe[i] = saved + offsets[k];
      f[k] = loss_fn(probe);
      if (!std::isfinite(f[k])) {
        probe[i] = saved;
        throw ValidationError("grad_check: non-finite loss");
      }
    }
    probe[i] = saved;
    // Fourth-order central stencil; truncation ~ h^4 lets h sit well above
    // the rounding floor without biasing the estimate.
    const double numeric = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    const double analytic = analytic_grad[i];
    const double scale = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

}  // namespace milmix
