#ifndef MILMIX_AUGMENT_HPP
#define MILMIX_AUGMENT_HPP

#include <string>
#include <vector>

#include "milmix/bag.hpp"
#include "milmix/rng.hpp"

namespace milmix {

enum class AugmentMode {
  kNone,
  kIntraLinear,
  kIntraMultilinear,
  kInterV1,
  kInterV2,
};

AugmentMode parse_augment_mode(const std::string& text);
const char* to_string(AugmentMode mode);
bool is_intra(AugmentMode mode);
bool is_inter(AugmentMode mode);

struct AugmentConfig {
  AugmentMode mode = AugmentMode::kNone;
  // Selective probability: chance that an intra mode actually mixes a bag,
  // keeping the real sample otherwise. Ignored for non-intra modes. The
  // default leaves half the training bags unmixed per epoch on average.
  double beta = 0.5;
};

/// Permutes patch rows by a uniform Fisher-Yates permutation. Label, id and
/// origin are unchanged.
FeatureBag shuffle_instances(const FeatureBag& bag, RngStream& rng);

/// Replaces every patch row k by an interpolation of two uniformly chosen rows
/// i, j of the same bag: x'_k = a * x_i + (1 - a) * x_j. Linear mode draws one
/// uniform scalar a per output row; multilinear mode draws an independent
/// uniform weight per feature dimension. Draw order per row: i, j, then the
/// weight(s). Interpolation is evaluated in double and stored as f32, so every
/// output coordinate stays inside the convex hull of its two parents.
FeatureBag intra_mixup(const FeatureBag& bag, bool multilinear, RngStream& rng);

/// With probability cfg.beta returns intra_mixup(bag, ...), otherwise the bag
/// unchanged. The selection draw is consumed either way.
FeatureBag apply_selective(const FeatureBag& bag, const AugmentConfig& cfg, RngStream& rng);

/// Position-wise interpolation of two bags (after upstream shuffling):
/// row k = alpha * w_k + (1 - alpha) * v_k over the first min(P_w, P_v) rows.
/// The label is mixed the same way when mix_labels is set, else taken from w.
FeatureBag inter_mixup(const FeatureBag& bag_w, const FeatureBag& bag_v, double alpha,
                       bool mix_labels);

/// Materializes one epoch of training bags: always |train| outputs.
///   none:  each bag shuffled.
///   intra: each bag shuffled, then selectively mixed.
///   inter: per output slot draw parents w, v (V1 restricts v to w's class),
///          one alpha, shuffle both parents, then inter_mixup; labels are
///          mixed for V2 only. All randomness is redrawn on every call.
std::vector<FeatureBag> build_epoch_bags(const BagDataset& train, const AugmentConfig& cfg,
                                         RngStream& rng);

}  // namespace milmix

#endif  // MILMIX_AUGMENT_HPP
