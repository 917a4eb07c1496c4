#include "milmix/synthetic.hpp"

#include <cmath>
#include <iostream>

#include "milmix/errors.hpp"

namespace milmix {

void validate_spec(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ValidationError("synthetic: classes must be >= 2");
  if (spec.classes * spec.bags_per_class == 0)
    throw ValidationError("synthetic: empty spec (no bags requested)");
  if (spec.patches_per_bag < 1) throw ValidationError("synthetic: patches_per_bag must be >= 1");
  if (spec.dim < 1) throw ValidationError("synthetic: dim must be >= 1");
  if (spec.signal_fraction < 0.0 || spec.signal_fraction > 1.0)
    throw ValidationError("synthetic: signal_fraction outside [0, 1]");
  if (spec.class_separation < 0.0) throw ValidationError("synthetic: class_separation must be >= 0");
  if (!(spec.patch_noise > 0.0)) throw ValidationError("synthetic: patch_noise must be > 0");
  if (spec.bag_offset_scale < 0.0) throw ValidationError("synthetic: bag_offset_scale must be >= 0");
}

BagDataset generate_synthetic(const SyntheticSpec& spec, RngStream& rng) {
  validate_spec(spec);
  const std::size_t patches = spec.patches_per_bag;
  const std::size_t dim = spec.dim;
  const auto signal_patches =
      static_cast<std::size_t>(std::lround(spec.signal_fraction * static_cast<double>(patches)));
  if (signal_patches == 0 && spec.class_separation > 0.0) {
    std::cerr << "milmix: warning: signal_fraction * patches rounds to 0; "
                 "generated bags carry no class signal\n";
  }

  BagDataset ds;
  ds.descriptor_dim = dim;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    ds.class_names.push_back("class" + std::to_string(c));
  }

  std::vector<double> offset(dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const std::size_t axis = c % dim;
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    const double centroid = sign * spec.class_separation / 2.0;
    for (std::size_t b = 0; b < spec.bags_per_class; ++b) {
      FeatureBag bag;
      bag.id = "synth-c" + std::to_string(c) + "-b" + std::to_string(b);
      bag.label.assign(spec.classes, 0.0f);
      bag.label[c] = 1.0f;
      bag.features = Matrix<float>(patches, dim);

      for (auto& o : offset) o = spec.bag_offset_scale * rng.normal();
      for (std::size_t p = 0; p < patches; ++p) {
        const bool signal = p < signal_patches;
        for (std::size_t d = 0; d < dim; ++d) {
          double value = offset[d] + spec.patch_noise * rng.normal();
          if (signal && d == axis) value += centroid;
          bag.features(p, d) = static_cast<float>(value);
        }
      }
      ds.bags.push_back(std::move(bag));
    }
  }
  return ds;
}

}  // namespace milmix
