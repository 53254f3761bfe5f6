// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sepkit/datagen.hpp"
#include "sepkit/dsp.hpp"
#include "sepkit/model_config.hpp"
#include "sepkit/nn/layers.hpp"

namespace sepkit {

using nn::Tensor;

/// Adds proj_t(target) + proj_i(interference), shape (N, C), at every spatial
/// location of feature_map (N, C, H, W).
template <typename T>
Tensor<T> condition(const Tensor<T>& feature_map, const Tensor<T>& target_embedding,
                    const Tensor<T>& interference_embedding, const nn::Linear<T>& proj_target,
                    const nn::Linear<T>& proj_interference);

/// Per-conv projections of the two speaker embeddings.
template <typename T>
struct BlockConditioning {
  nn::Linear<T> target1, interference1;  // after conv1
  nn::Linear<T> target2, interference2;  // after conv2
};

/// y = relu(bn_out(conv2(relu(bn_mid(conv1(x)))) + shortcut(x)))
/// conv1 carries the block stride, conv2 is stride 1. The shortcut is a
/// strided 1x1 convolution when channels or spatial size change, otherwise
/// the identity. Conditioned blocks add the projected embeddings after each
/// convolution (post_conv) or after the following batch norm (post_bn).
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t in_ch, const BlockSpec& spec, std::size_t out_ch, const ModelConfig& cfg,
                std::mt19937_64& rng, bool conditioned);

  /// target/interference embeddings are (N, E); pass undefined tensors for
  /// unconditioned blocks.
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& target_embedding,
                    const Tensor<T>& interference_embedding);
  nn::Shape output_shape(const nn::Shape& in) const;
  void collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const;
  void set_training(bool training);

  nn::Conv2d<T> conv1, conv2;
  nn::BatchNorm2d<T> bn_mid, bn_out;
  std::optional<nn::Conv2d<T>> shortcut;
  std::optional<BlockConditioning<T>> cond;
  InjectionPoint injection = InjectionPoint::kPostBn;
};

/// Residual blocks followed by global average pooling: (N, 1, frames, F)
/// -> (N, embed_dim).
template <typename T>
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  EmbeddingNet(const ModelConfig& cfg, std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& context);
  /// Shape entering the pooling layer, from the constructed layers.
  nn::Shape pre_pool_shape(const nn::Shape& in) const;
  void collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const;
  void set_training(bool training);

  std::vector<ResidualBlock<T>> blocks;
};

/// Conditioned residual blocks, flatten, fully-connected to n_freq.
/// The final layer starts at zero so the initial estimate is the mixture
/// center frame itself.
template <typename T>
class SeparationNet {
 public:
  SeparationNet() = default;
  SeparationNet(const ModelConfig& cfg, std::mt19937_64& rng);

  /// segment (N, 1, S, F) -> offset o (N, F); est_target = center + o.
  Tensor<T> forward(const Tensor<T>& segment, const Tensor<T>& target_embedding,
                    const Tensor<T>& interference_embedding);
  nn::Shape flatten_shape(const nn::Shape& in) const;
  void collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const;
  void set_training(bool training);

  std::vector<ResidualBlock<T>> blocks;
  nn::Linear<T> fc;
};

/// Per-frame output: est_interference = mixture_center - est_target.
template <typename T>
struct FramePair {
  std::vector<T> est_target;
  std::vector<T> est_interference;
};

/// The full model: two weight-independent embedding subnetworks and the
/// conditioned separation subnetwork.
template <typename T>
class Separator {
 public:
  explicit Separator(const ModelConfig& cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }

  /// Every tensor with a stable name, running statistics included.
  std::vector<nn::NamedTensor<T>> named_state() const;
  std::vector<Tensor<T>> parameters() const;
  void set_training(bool training);

  /// (N, 1, context_frames, F) -> (N, embed_dim)
  Tensor<T> embed_target(const Tensor<T>& context) { return target_net.forward(context); }
  Tensor<T> embed_interference(const Tensor<T>& context) { return interference_net.forward(context); }

  /// Returns the estimated target frames (N, F) = center + separation output.
  Tensor<T> estimate_target(const Tensor<T>& segments, const Tensor<T>& target_contexts,
                            const Tensor<T>& interference_contexts);

  EmbeddingNet<T> target_net;
  EmbeddingNet<T> interference_net;
  SeparationNet<T> separation;

 private:
  ModelConfig cfg_;
};

/// Packs log-mag matrices (all frames x F) into (N, 1, frames, F).
template <typename T>
Tensor<T> pack_spectrograms(std::span<const RealFrames* const> mats);

/// Rows `center` of each segment in an (N, 1, S, F) tensor, as (N, F).
template <typename T>
Tensor<T> center_frames(const Tensor<T>& segments, std::size_t center);

/// Single-speaker embedding from a context of exactly context_frames frames.
template <typename T>
std::vector<T> embed_speaker(const LogMagSpectrogram& context, EmbeddingNet<T>& net, const ModelConfig& cfg);

/// One segment of exactly segment_frames frames with precomputed embeddings.
template <typename T>
FramePair<T> separate_frame(const LogMagSpectrogram& mixture_segment, std::span<const T> target_embedding,
                            std::span<const T> interference_embedding, SeparationNet<T>& net,
                            const ModelConfig& cfg);

/// Forward, MSE against the label frames, backward, one SGD step.
/// Batch-norm layers run in training mode. A positive max_grad_norm clips the
/// global gradient norm before the step. Returns the pre-step loss.
template <typename T>
double training_step(std::span<const TrainingExample> batch, Separator<T>& model, T lr,
                     double max_grad_norm = 0.0);

/// Builds the training loss for a batch without stepping (gradient checks).
template <typename T>
Tensor<T> batch_loss(std::span<const TrainingExample> batch, Separator<T>& model);

/// Weights in the f32 checkpoint format, config JSON at `<path>.json`.
void save_model(const std::filesystem::path& path, const Separator<float>& model,
                const nlohmann::json& extra = {});
/// Throws kConfigMismatch when the stored tensors disagree with the config.
Separator<float> load_model(const std::filesystem::path& path);
std::filesystem::path config_path_for(const std::filesystem::path& checkpoint);

extern template class Separator<float>;
extern template class Separator<double>;

}  // namespace sepkit
