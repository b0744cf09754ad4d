#pragma once

#include <string>

#include "starpose/tensor.hpp"

namespace starpose {

// Unified checkpoint container. Binary layout, little-endian throughout:
//   magic "SPSE" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank]
//               | f64 payload (IEEE-754 bit patterns) | u64 FNV-1a checksum
// Round-trips are bit-exact; checksums are verified on load.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamTable& tensors);
ParamTable load_checkpoint(const std::string& path);

}  // namespace starpose
