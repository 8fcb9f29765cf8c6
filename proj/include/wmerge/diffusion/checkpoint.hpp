#pragma once

#include <string>

#include "wmerge/diffusion/model.hpp"

namespace wmerge::diffusion {

// Checkpoint file: little-endian; magic "MIPW", u32 version=1, u32 tensor
// count; per tensor: u16 name length, UTF-8 name, u8 ndim, u32 dims, raw
// 32-bit float data; trailing CRC32 of everything after the 12-byte header.
// Model config travels as 1x1 tensors named "config.*".
void save_checkpoint(const DenoiserParams& params, const std::string& path);
DenoiserParams load_checkpoint(const std::string& path);

}  // namespace wmerge::diffusion
