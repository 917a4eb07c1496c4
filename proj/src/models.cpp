#include "milmix/models.hpp"

namespace milmix {

ModelKind parse_model_kind(const std::string& text) {
  if (text == "abmil") return ModelKind::kAbmil;
  if (text == "dsmil") return ModelKind::kDsmil;
  throw ValidationError("unknown model kind '" + text + "' (expected abmil or dsmil)");
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::kAbmil ? "abmil" : "dsmil";
}

ModelKind kind_of(const MilModel& model) {
  return std::holds_alternative<AbmilModel<float>>(model) ? ModelKind::kAbmil
                                                          : ModelKind::kDsmil;
}

MilModel init_model(ModelKind kind, std::size_t dim, std::size_t classes, RngStream& rng) {
  if (dim == 0) throw ValidationError("init_model: dim must be positive");
  if (classes < 2) throw ValidationError("init_model: need at least two classes");
  if (kind == ModelKind::kAbmil) {
    AbmilModel<float> m;
    m.attn_v = init_dense<float>(kAttentionHidden, dim, rng);
    m.attn_u = init_dense<float>(kAttentionHidden, dim, rng);
    m.attn_w.resize(kAttentionHidden);
    const double bound = std::sqrt(6.0 / static_cast<double>(kAttentionHidden + 1));
    for (auto& w : m.attn_w) {
      w = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
    }
    m.classifier = init_dense<float>(classes, dim, rng);
    return m;
  }
  DsmilModel<float> m;
  m.inst_classifier = init_dense<float>(classes, dim, rng);
  m.query = init_dense<float>(kQueryDim, dim, rng);
  m.value = init_dense<float>(dim, dim, rng);
  m.bag_classifier = init_dense<float>(classes, dim, rng);
  m.stream_weight = static_cast<float>(kStreamWeight);
  return m;
}

namespace {

std::size_t argmax_lowest(std::span<const float> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

Prediction predict(const MilModel& model, const FeatureBag& bag) {
  return std::visit(
      [&](const auto& m) {
        const auto fwd = [&] {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AbmilModel<float>>) {
            return abmil_forward(m, bag.features).class_probs;
          } else {
            return dsmil_forward(m, bag.features).fused_probs;
          }
        }();
        const std::size_t idx = argmax_lowest(fwd);
        return Prediction{idx, static_cast<double>(fwd[idx])};
      },
      model);
}

double mil_loss(const MilModel& model, const FeatureBag& bag) {
  const std::span<const float> target(bag.label);
  return std::visit(
      [&](const auto& m) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AbmilModel<float>>) {
          return abmil_loss(abmil_forward(m, bag.features), target);
        } else {
          return dsmil_loss(dsmil_forward(m, bag.features), target);
        }
      },
      model);
}

double mil_loss_and_grads(const MilModel& model, const FeatureBag& bag, MilModel* grads) {
  if (grads == nullptr) return mil_loss(model, bag);
  const std::span<const float> target(bag.label);
  return std::visit(
      [&](const auto& m) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AbmilModel<float>>) {
          const auto fwd = abmil_forward(m, bag.features);
          *grads = abmil_backward(m, bag.features, fwd, target);
          return abmil_loss(fwd, target);
        } else {
          const auto fwd = dsmil_forward(m, bag.features);
          *grads = dsmil_backward(m, bag.features, fwd, target);
          return dsmil_loss(fwd, target);
        }
      },
      model);
}

}  // namespace milmix
