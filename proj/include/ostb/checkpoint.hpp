#pragma once

#include <string>

#include "ostb/siamese.hpp"

namespace ostb {

// Binary checkpoint, little-endian throughout:
//   magic   "OSTB"
//   u16     version (currently 1)
//   u32     parameter count
//   records u32 name length, utf-8 name, u32 rank, u64 dims[rank], f32 data
//   u32     CRC32 of everything before it
// A JSON sidecar (<path>.json) carries the model config so checkpoints are
// self-describing.
void save_checkpoint(const std::string& path, const SiameseModel<float>& model);

SiameseModel<float> load_checkpoint(const std::string& path);

}  // namespace ostb
