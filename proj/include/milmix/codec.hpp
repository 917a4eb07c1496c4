#ifndef MILMIX_CODEC_HPP
#define MILMIX_CODEC_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "milmix/bag.hpp"

namespace milmix {

// MBAG bag container, little-endian throughout:
//
//   magic    "MBAG"      4 bytes
//   version  u32         currently 1
//   id_len   u32
//   id       UTF-8 bytes
//   C        u32         label length
//   P        u32         patch count
//   D        u32         descriptor dimension
//   label    C x f32
//   features P x D x f32, row-major
//
// A dataset on disk is a directory of *.mbag files plus a manifest.txt:
// class names one per line, then "id,class_index,filename" rows.

inline constexpr std::uint32_t kMbagVersion = 1;
inline constexpr const char* kManifestName = "manifest.txt";

std::vector<std::uint8_t> encode_bag(const FeatureBag& bag);
FeatureBag decode_bag(std::span<const std::uint8_t> bytes);

void save_bag(const std::filesystem::path& path, const FeatureBag& bag);
FeatureBag load_bag(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& dir, const BagDataset& ds);
BagDataset load_dataset(const std::filesystem::path& dir);

/// Imports precomputed features from CSV: one row per patch, columns
/// bag_id,class_name,feature_0,...  Values may be 32- or 64-bit decimal;
/// they are normalized to f32. Class list follows first appearance order.
BagDataset import_patch_csv(const std::filesystem::path& path);

}  // namespace milmix

#endif  // MILMIX_CODEC_HPP
