// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstddef>

#include "sepkit/nn/tensor.hpp"

namespace sepkit::nn {

struct Stride2d {
  std::size_t time = 1;
  std::size_t freq = 1;
};

/// Output spatial extent under "same" padding: ceil(in / stride).
std::size_t same_out(std::size_t in, std::size_t stride);

/// Leading pad for "same" padding; the total pad
/// max((out - 1) * stride + k - in, 0) is split floor-left / ceil-right.
std::size_t same_pad_before(std::size_t in, std::size_t k, std::size_t stride);

/// 2-D cross-correlation with "same" padding.
/// x: (N, C, H, W), weight: (O, C, kh, kw), bias: (O) or undefined.
/// Returns (N, O, ceil(H / st), ceil(W / sf)).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Stride2d stride);

/// Per-channel normalization over (N, H, W). In training mode the biased
/// batch variance normalizes and the running statistics are updated in place:
///   running = momentum * running + (1 - momentum) * batch
/// (the running variance tracks the unbiased batch variance). In inference
/// mode the running statistics normalize.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training, T eps,
                     T momentum);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Elementwise a + b, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// x: (N, C, H, W), per_channel: (N, C). Adds per_channel[n, c] at every (h, w).
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& per_channel);

/// x: (N, D), weight: (O, D), bias: (O). y = x W^T + b.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// (N, C, H, W) -> (N, C), mean over H x W.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

/// (N, ...) -> (N, prod(...)).
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

/// Mean over all elements of (pred - label)^2.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& label);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// sum_i x_i * w_i with w held constant. Useful for probing gradients.
template <typename T>
Tensor<T> dot_const(const Tensor<T>& x, std::span<const T> w);

}  // namespace sepkit::nn
