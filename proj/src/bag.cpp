#include "milmix/bag.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "milmix/errors.hpp"

namespace milmix {

const char* to_string(BagOrigin origin) {
  switch (origin) {
    case BagOrigin::kReal: return "real";
    case BagOrigin::kIntraMix: return "intra-mix";
    case BagOrigin::kInterMix: return "inter-mix";
  }
  return "unknown";
}

void validate_bag(const FeatureBag& bag) {
  if (bag.features.rows() < 1)
    throw ValidationError("bag '" + bag.id + "': patch count must be >= 1");
  if (bag.features.cols() < 1)
    throw ValidationError("bag '" + bag.id + "': descriptor dimension must be >= 1");
  if (bag.label.size() < 2)
    throw ValidationError("bag '" + bag.id + "': class count must be >= 2");
  for (const float v : bag.features.data()) {
    if (!std::isfinite(v))
      throw ValidationError("bag '" + bag.id + "': non-finite feature entry");
  }
  double sum = 0.0;
  for (const float v : bag.label) {
    if (!std::isfinite(v) || v < 0.0f)
      throw ValidationError("bag '" + bag.id + "': label entries must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError("bag '" + bag.id + "': label does not sum to 1");
  if (bag.origin == BagOrigin::kReal && !is_one_hot(bag.label))
    throw ValidationError("bag '" + bag.id + "': real bag requires a one-hot label");
}

void validate_dataset(const BagDataset& ds) {
  const std::size_t class_count = ds.class_names.size();
  if (class_count < 2) throw ValidationError("dataset: needs at least 2 classes");
  std::unordered_set<std::string> seen;
  for (const FeatureBag& bag : ds.bags) {
    validate_bag(bag);
    if (bag.dim() != ds.descriptor_dim)
      throw ValidationError("bag '" + bag.id + "': descriptor dimension mismatch with dataset");
    if (bag.class_count() != class_count)
      throw ValidationError("bag '" + bag.id + "': label length mismatch with class list");
    if (!seen.insert(bag.id).second)
      throw ValidationError("dataset: duplicate bag id '" + bag.id + "'");
  }
}

bool is_one_hot(std::span<const float> label) {
  std::size_t ones = 0;
  for (const float v : label) {
    if (v == 1.0f) {
      ++ones;
    } else if (v != 0.0f) {
      return false;
    }
  }
  return ones == 1;
}

std::size_t argmax_index(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

BagDataset subsample_dataset(const BagDataset& ds, std::size_t per_class, RngStream& rng) {
  if (per_class < 1) throw ValidationError("subsample_dataset: per_class must be >= 1");
  const std::size_t class_count = ds.class_names.size();

  std::vector<std::vector<std::size_t>> by_class(class_count);
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const FeatureBag& bag = ds.bags[i];
    if (!is_one_hot(bag.label)) continue;
    by_class[argmax_index(bag.label)].push_back(i);
  }

  std::vector<char> keep(ds.bags.size(), 0);
  for (std::size_t c = 0; c < class_count; ++c) {
    const auto& members = by_class[c];
    if (members.size() < per_class) {
      throw ValidationError("subsample_dataset: class '" + ds.class_names[c] + "' has only " +
                            std::to_string(members.size()) + " bags, need " +
                            std::to_string(per_class));
    }
    const auto order = rng.permutation(members.size());
    for (std::size_t k = 0; k < per_class; ++k) keep[members[order[k]]] = 1;
  }

  BagDataset out;
  out.class_names = ds.class_names;
  out.descriptor_dim = ds.descriptor_dim;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    if (keep[i]) out.bags.push_back(ds.bags[i]);
  }
  return out;
}

FeatureBag subsample_patches(const FeatureBag& bag, std::size_t p, RngStream& rng) {
  const std::size_t total = bag.patch_count();
  if (p < 1 || p > total) {
    throw ValidationError("subsample_patches: p=" + std::to_string(p) +
                          " outside [1, " + std::to_string(total) + "]");
  }
  auto order = rng.permutation(total);
  order.resize(p);
  std::sort(order.begin(), order.end());

  FeatureBag out;
  out.id = bag.id;
  out.label = bag.label;
  out.origin = bag.origin;
  out.features = Matrix<float>(p, bag.dim());
  for (std::size_t k = 0; k < p; ++k) {
    const auto src = bag.features.row(order[k]);
    std::copy(src.begin(), src.end(), out.features.row(k).begin());
  }
  return out;
}

}  // namespace milmix
