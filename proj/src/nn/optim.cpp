// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sepkit/error.hpp"

namespace sepkit::nn {

template <typename T>
void sgd_step(std::vector<Tensor<T>>& params, T lr) {
  for (const auto& p : params) {
    if (!p.has_grad()) {
      throw Error(Errc::kMissingGrad, "parameter of shape " + shape_str(p.shape()) +
                                          " has no gradient; run backward() first");
    }
  }
  for (auto& p : params) {
    auto d = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr * g[i];
    p.zero_grad();
  }
}

template <typename T>
double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (auto& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

double grad_check(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> params,
                  double eps) {
  for (auto& p : params) p.drop_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.grad();
    analytic.emplace_back(p.has_grad() ? std::vector<double>(g.begin(), g.end())
                                       : std::vector<double>(p.numel(), 0.0));
    p.drop_grad();
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto d = params[k].data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double saved = d[i];
      d[i] = saved + eps;
      const double up = loss().item();
      d[i] = saved - eps;
      const double down = loss().item();
      d[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

template void sgd_step(std::vector<Tensor<float>>&, float);
template void sgd_step(std::vector<Tensor<double>>&, double);
template double clip_grad_norm(std::vector<Tensor<float>>&, double);
template double clip_grad_norm(std::vector<Tensor<double>>&, double);

}  // namespace sepkit::nn
