#ifndef MILMIX_CHECKPOINT_HPP
#define MILMIX_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "milmix/models.hpp"

namespace milmix {

// Model checkpoint container, little-endian throughout:
//
//   magic "MMLP" | version u32 = 1 | kind_len u32 | kind bytes |
//   block_count u32 | blocks...
//
// Each block: name_len u32 | name bytes | ndim u32 | dims (u32 x ndim) |
// f32 data (product of dims values, row-major).
//
// Blocks appear in the fixed parameter-visitation order of the model kind;
// dsmil appends a final "stream_weight" block of shape [1]. Decoding requires
// the exact names in that order so that a reload is bit-exact and
// misassembled files fail loudly.

inline constexpr std::uint32_t kMmlpVersion = 1;

std::vector<std::uint8_t> encode_model(const MilModel& model);
MilModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const MilModel& model, const std::string& path);
MilModel load_model(const std::string& path);

}  // namespace milmix

#endif  // MILMIX_CHECKPOINT_HPP
