#ifndef MILMIX_BAG_HPP
#define MILMIX_BAG_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "milmix/matrix.hpp"
#include "milmix/rng.hpp"

namespace milmix {

enum class BagOrigin : std::uint8_t { kReal = 0, kIntraMix = 1, kInterMix = 2 };

const char* to_string(BagOrigin origin);

/// One whole slide image as a bag of patch descriptors with a soft class label.
struct FeatureBag {
  std::string id;
  std::vector<float> label;   // length C, entries >= 0, sums to 1
  Matrix<float> features;     // P x D, row i = descriptor of patch i
  BagOrigin origin = BagOrigin::kReal;

  std::size_t patch_count() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t class_count() const { return label.size(); }
};

/// Labeled bag collection with a consistent descriptor dimension and class list.
struct BagDataset {
  std::vector<FeatureBag> bags;
  std::vector<std::string> class_names;
  std::size_t descriptor_dim = 0;
};

/// Throws ValidationError naming the first violated invariant.
void validate_bag(const FeatureBag& bag);
void validate_dataset(const BagDataset& ds);

/// True when exactly one entry equals 1 and the rest are 0.
bool is_one_hot(std::span<const float> label);

/// Index of the largest entry, ties to the lowest index.
std::size_t argmax_index(std::span<const float> values);

/// Uniformly keeps per_class one-hot bags per class, preserving dataset order.
BagDataset subsample_dataset(const BagDataset& ds, std::size_t per_class, RngStream& rng);

/// Uniformly keeps p patch rows without replacement, preserving row order.
FeatureBag subsample_patches(const FeatureBag& bag, std::size_t p, RngStream& rng);

}  // namespace milmix

#endif  // MILMIX_BAG_HPP
