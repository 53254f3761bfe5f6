// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepkit/nn/tensor.hpp"

namespace sepkit {

struct BlockSpec {
  std::size_t kernel_time;
  std::size_t kernel_freq;
  std::size_t stride_time;
  std::size_t stride_freq;
  std::size_t channels;

  bool operator==(const BlockSpec&) const = default;
};

/// Where the projected speaker embeddings enter each separation conv layer:
/// straight after the convolution, or after its batch normalization.
enum class InjectionPoint { kPostConv, kPostBn };

/// Speaker-embedding subnetwork: 4 residual blocks.
std::vector<BlockSpec> default_embedding_blocks();
/// Separation subnetwork: 8 residual blocks.
std::vector<BlockSpec> default_separation_blocks();

struct ModelConfig {
  std::vector<BlockSpec> embed_blocks = default_embedding_blocks();
  std::vector<BlockSpec> sep_blocks = default_separation_blocks();
  std::size_t segment_frames = 100;
  std::size_t context_frames = 35;
  std::size_t n_freq = 201;
  double width_scale = 1.0;  // multiplies every channel count, rounded up
  InjectionPoint injection_point = InjectionPoint::kPostBn;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  std::size_t scaled(std::size_t channels) const;
  std::size_t embed_dim() const;
  /// 0-based index of the frame the model predicts.
  std::size_t center_frame() const { return segment_frames / 2; }

  /// Throws kInvalidConfig.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// (N, C, H, W) after each residual block, computed from stride arithmetic
/// alone. Index 0 is the input shape.
std::vector<nn::Shape> embedding_shape_ladder(const ModelConfig& cfg, std::size_t batch = 1);
std::vector<nn::Shape> separation_shape_ladder(const ModelConfig& cfg, std::size_t batch = 1);
/// Input width of the final fully-connected layer.
std::size_t flatten_size(const ModelConfig& cfg);

void to_json(nlohmann::json& j, const ModelConfig& cfg);
/// Missing keys keep their defaults; the stored embed_dim, when present, must
/// agree with the block table (kConfigMismatch otherwise).
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace sepkit
