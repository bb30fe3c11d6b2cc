#pragma once

#include <string>

#include "csattn/params.hpp"

namespace csattn {

// On-disk named-tensor archive, little-endian throughout:
//   "CSAT" | u32 version (1) | u32 tensor count |
//   per tensor: u32 name length, UTF-8 name, u32 rank, u32 extents[rank],
//               u8 dtype (0 = f32), raw f32 payload |
//   u32 CRC32 of all preceding bytes.
// Round trips are bitwise; the CRC is validated on load.

void save_checkpoint(const std::string& path, const ParamStore<float>& params);

ParamStore<float> load_checkpoint(const std::string& path);

// Loads by name into an existing store; every stored name must be present
// with a matching shape.
void load_checkpoint_into(const std::string& path, ParamStore<float>& params);

}  // namespace csattn
