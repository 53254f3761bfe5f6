// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <random>
#include <string>
#include <vector>

#include "sepkit/nn/ops.hpp"
#include "sepkit/nn/tensor.hpp"

namespace sepkit::nn {

/// A tensor reachable from a module, with its hierarchical name. Running
/// statistics are state but not trainable.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

enum class Init { kHeNormal, kZero };

/// Weights ~ N(0, 2 / fan_in); biases zero.
template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw, Stride2d stride,
         std::mt19937_64& rng, Init init = Init::kHeNormal);

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride); }
  Shape output_shape(const Shape& in) const;
  void collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor<T> weight;  // (out, in, kh, kw)
  Tensor<T> bias;    // (out)
  Stride2d stride;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels, T eps = T(1e-5), T momentum = T(0.9));

  Tensor<T> forward(const Tensor<T>& x);
  void collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const;

  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T eps = T(1e-5);
  T momentum = T(0.9);
  bool training = true;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng, Init init = Init::kHeNormal);

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const;

  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Linear<float>;
extern template class Linear<double>;

}  // namespace sepkit::nn
