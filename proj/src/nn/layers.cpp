// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/nn/layers.hpp"

#include <cmath>

#include "sepkit/error.hpp"

namespace sepkit::nn {

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> data(numel(shape));
  for (T& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(data), true);
}

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                  Stride2d s, std::mt19937_64& rng, Init init)
    : stride(s) {
  if (in_ch == 0 || out_ch == 0 || kh == 0 || kw == 0 || s.time == 0 || s.freq == 0) {
    throw Error(Errc::kInvalidConfig, "conv2d dimensions and strides must be >= 1");
  }
  Shape shape{out_ch, in_ch, kh, kw};
  weight = init == Init::kHeNormal ? he_normal<T>(shape, in_ch * kh * kw, rng)
                                   : Tensor<T>::zeros(shape, true);
  bias = Tensor<T>::zeros({out_ch}, true);
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] != in_channels()) {
    throw Error(Errc::kShapeMismatch, "conv2d input " + shape_str(in) + " vs kernel " +
                                          shape_str(weight.shape()));
  }
  return {in[0], out_channels(), same_out(in[2], stride.time), same_out(in[3], stride.freq)};
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, T e, T m)
    : gamma(Tensor<T>::full({channels}, T(1), true)),
      beta(Tensor<T>::zeros({channels}, true)),
      running_mean(Tensor<T>::zeros({channels})),
      running_var(Tensor<T>::full({channels}, T(1))),
      eps(e),
      momentum(m) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x) {
  return batch_norm(x, gamma, beta, running_mean, running_var, training, eps, momentum);
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const {
  out.push_back({prefix + ".gamma", gamma, true});
  out.push_back({prefix + ".beta", beta, true});
  out.push_back({prefix + ".running_mean", running_mean, false});
  out.push_back({prefix + ".running_var", running_var, false});
}

template <typename T>
Linear<T>::Linear(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng, Init init) {
  if (in_dim == 0 || out_dim == 0) throw Error(Errc::kInvalidConfig, "linear dimensions must be positive");
  weight = init == Init::kHeNormal ? he_normal<T>({out_dim, in_dim}, in_dim, rng)
                                   : Tensor<T>::zeros({out_dim, in_dim}, true);
  bias = Tensor<T>::zeros({out_dim}, true);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

template Tensor<float> he_normal(Shape, std::size_t, std::mt19937_64&);
template Tensor<double> he_normal(Shape, std::size_t, std::mt19937_64&);
template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace sepkit::nn
