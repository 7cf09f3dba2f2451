#pragma once

#include <filesystem>

#include "avtenet/tensor.hpp"

namespace avtenet {

// Binary parameter container, little-endian:
//   "AVTE" | u32 version (=1) | u32 tensor count |
//   per tensor (lexicographic name order):
//     u16 name length | name bytes (UTF-8) | u8 rank | u64 per dim |
//     f64 row-major payload.
// Save and load round-trip bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
// trainable marks every loaded tensor requires_grad (for resuming training).
ParameterSet load_checkpoint(const std::filesystem::path& path, bool trainable = false);

}  // namespace avtenet
