#include "milmix/augment.hpp"

#include <algorithm>

#include "milmix/errors.hpp"

namespace milmix {

AugmentMode parse_augment_mode(const std::string& text) {
  if (text == "none") return AugmentMode::kNone;
  if (text == "intra-linear") return AugmentMode::kIntraLinear;
  if (text == "intra-multilinear") return AugmentMode::kIntraMultilinear;
  if (text == "inter-v1") return AugmentMode::kInterV1;
  if (text == "inter-v2") return AugmentMode::kInterV2;
  throw ValidationError("unknown augment mode '" + text + "'");
}

const char* to_string(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::kNone: return "none";
    case AugmentMode::kIntraLinear: return "intra-linear";
    case AugmentMode::kIntraMultilinear: return "intra-multilinear";
    case AugmentMode::kInterV1: return "inter-v1";
    case AugmentMode::kInterV2: return "inter-v2";
  }
  return "unknown";
}

bool is_intra(AugmentMode mode) {
  return mode == AugmentMode::kIntraLinear || mode == AugmentMode::kIntraMultilinear;
}

bool is_inter(AugmentMode mode) {
  return mode == AugmentMode::kInterV1 || mode == AugmentMode::kInterV2;
}

FeatureBag shuffle_instances(const FeatureBag& bag, RngStream& rng) {
  validate_bag(bag);
  const auto order = rng.permutation(bag.patch_count());
  FeatureBag out;
  out.id = bag.id;
  out.label = bag.label;
  out.origin = bag.origin;
  out.features = Matrix<float>(bag.patch_count(), bag.dim());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto src = bag.features.row(order[k]);
    std::copy(src.begin(), src.end(), out.features.row(k).begin());
  }
  return out;
}

FeatureBag intra_mixup(const FeatureBag& bag, bool multilinear, RngStream& rng) {
  validate_bag(bag);
  const std::size_t patches = bag.patch_count();
  const std::size_t dim = bag.dim();

  FeatureBag out;
  out.id = bag.id;
  out.label = bag.label;
  out.origin = BagOrigin::kIntraMix;
  out.features = Matrix<float>(patches, dim);

  for (std::size_t k = 0; k < patches; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(patches));
    const auto j = static_cast<std::size_t>(rng.uniform_int(patches));
    const auto xi = bag.features.row(i);
    const auto xj = bag.features.row(j);
    if (multilinear) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double a = rng.uniform();
        out.features(k, d) = static_cast<float>(a * static_cast<double>(xi[d]) +
                                                (1.0 - a) * static_cast<double>(xj[d]));
      }
    } else {
      const double a = rng.uniform();
      for (std::size_t d = 0; d < dim; ++d) {
        out.features(k, d) = static_cast<float>(a * static_cast<double>(xi[d]) +
                                                (1.0 - a) * static_cast<double>(xj[d]));
      }
    }
  }
  return out;
}

FeatureBag apply_selective(const FeatureBag& bag, const AugmentConfig& cfg, RngStream& rng) {
  if (!is_intra(cfg.mode)) {
    throw ValidationError("apply_selective: requires an intra augment mode");
  }
  if (cfg.beta < 0.0 || cfg.beta > 1.0) {
    throw ValidationError("apply_selective: beta outside [0, 1]");
  }
  const double pick = rng.uniform();
  if (pick < cfg.beta) {
    return intra_mixup(bag, cfg.mode == AugmentMode::kIntraMultilinear, rng);
  }
  return bag;
}

FeatureBag inter_mixup(const FeatureBag& bag_w, const FeatureBag& bag_v, double alpha,
                       bool mix_labels) {
  if (bag_w.dim() != bag_v.dim()) {
    throw ValidationError("inter_mixup: descriptor dimension mismatch");
  }
  if (bag_w.class_count() != bag_v.class_count()) {
    throw ValidationError("inter_mixup: class count mismatch");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw ValidationError("inter_mixup: alpha outside [0, 1]");
  }
  const std::size_t patches = std::min(bag_w.patch_count(), bag_v.patch_count());
  const std::size_t dim = bag_w.dim();

  FeatureBag out;
  out.id = bag_w.id + "+" + bag_v.id;
  out.origin = BagOrigin::kInterMix;
  out.features = Matrix<float>(patches, dim);
  for (std::size_t k = 0; k < patches; ++k) {
    const auto xw = bag_w.features.row(k);
    const auto xv = bag_v.features.row(k);
    for (std::size_t d = 0; d < dim; ++d) {
      out.features(k, d) = static_cast<float>(alpha * static_cast<double>(xw[d]) +
                                              (1.0 - alpha) * static_cast<double>(xv[d]));
    }
  }
  if (mix_labels) {
    out.label.resize(bag_w.class_count());
    for (std::size_t c = 0; c < out.label.size(); ++c) {
      out.label[c] = static_cast<float>(alpha * static_cast<double>(bag_w.label[c]) +
                                        (1.0 - alpha) * static_cast<double>(bag_v.label[c]));
    }
  } else {
    out.label = bag_w.label;
  }
  return out;
}

std::vector<FeatureBag> build_epoch_bags(const BagDataset& train, const AugmentConfig& cfg,
                                         RngStream& rng) {
  const std::size_t count = train.bags.size();
  if (count == 0) throw ValidationError("build_epoch_bags: empty training set");

  std::vector<FeatureBag> out;
  out.reserve(count);

  if (cfg.mode == AugmentMode::kNone) {
    for (const FeatureBag& bag : train.bags) out.push_back(shuffle_instances(bag, rng));
    return out;
  }

  if (is_intra(cfg.mode)) {
    for (const FeatureBag& bag : train.bags) {
      out.push_back(apply_selective(shuffle_instances(bag, rng), cfg, rng));
    }
    return out;
  }

  // Inter modes.
  std::vector<std::vector<std::size_t>> by_class;
  if (cfg.mode == AugmentMode::kInterV1) {
    by_class.resize(train.class_names.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!is_one_hot(train.bags[i].label)) {
        throw ValidationError("build_epoch_bags: inter-v1 requires one-hot training labels");
      }
      by_class[argmax_index(train.bags[i].label)].push_back(i);
    }
  }

  for (std::size_t slot = 0; slot < count; ++slot) {
    const auto w = static_cast<std::size_t>(rng.uniform_int(count));
    std::size_t v;
    if (cfg.mode == AugmentMode::kInterV1) {
      const auto& members = by_class[argmax_index(train.bags[w].label)];
      v = members[rng.uniform_int(members.size())];
    } else {
      v = static_cast<std::size_t>(rng.uniform_int(count));
    }
    const double alpha = rng.uniform();
    const FeatureBag shuffled_w = shuffle_instances(train.bags[w], rng);
    const FeatureBag shuffled_v = shuffle_instances(train.bags[v], rng);
    FeatureBag mixed = inter_mixup(shuffled_w, shuffled_v, alpha,
                                   cfg.mode == AugmentMode::kInterV2);
    mixed.id = std::to_string(slot) + ":" + mixed.id;
    out.push_back(std::move(mixed));
  }
  return out;
}

}  // namespace milmix
