#ifndef MILMIX_SYNTHETIC_HPP
#define MILMIX_SYNTHETIC_HPP

#include "milmix/bag.hpp"
#include "milmix/rng.hpp"

namespace milmix {

/// Desk-scale synthetic bag generator. Per class c, round(signal_fraction * P)
/// "signal" patches are drawn around a class centroid of magnitude
/// class_separation / 2 placed on axis (c mod D) with alternating sign; the
/// remaining patches come from a shared zero-mean background. Every patch of a
/// bag additionally receives that bag's offset, drawn once per bag with scale
/// bag_offset_scale. The signal fraction knob controls how much of each bag is
/// actually informative about its class.
struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t bags_per_class = 10;
  std::size_t patches_per_bag = 64;   // P
  std::size_t dim = 16;               // D
  double signal_fraction = 1.0;       // rho in [0, 1]
  double class_separation = 4.0;      // delta >= 0
  double patch_noise = 1.0;           // sigma > 0
  double bag_offset_scale = 0.0;      // tau >= 0
};

void validate_spec(const SyntheticSpec& spec);

/// Deterministic given (spec, stream seed). Labels are one-hot.
BagDataset generate_synthetic(const SyntheticSpec& spec, RngStream& rng);

}  // namespace milmix

#endif  // MILMIX_SYNTHETIC_HPP
