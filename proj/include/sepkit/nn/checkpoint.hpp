// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sepkit/nn/layers.hpp"

namespace sepkit::nn {

// Checkpoint layout, all integers little-endian:
//   bytes 0..3   magic "SPKC"
//   u32          format version (kCheckpointVersion)
//   u32          tensor count
//   per tensor:
//     u32        name length in bytes
//     bytes      name (UTF-8, no terminator)
//     u32        rank
//     u32 x rank dims
//     f32 x prod(dims) data, row-major, IEEE-754 little-endian
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor<float>>& tensors);
std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `tensors` by name. Throws kConfigMismatch when a
/// name is missing, unexpected, or has a different shape.
void load_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor<float>>& tensors);

}  // namespace sepkit::nn
