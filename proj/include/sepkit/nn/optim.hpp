// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <vector>

#include "sepkit/nn/tensor.hpp"

namespace sepkit::nn {

/// p <- p - lr * grad for every tensor, then zeroes the gradients.
/// Throws kMissingGrad if any tensor has no gradient (no backward reached it).
template <typename T>
void sgd_step(std::vector<Tensor<T>>& params, T lr);

/// Global L2 norm of all gradients (tensors without one are skipped). When it
/// exceeds max_norm > 0 every gradient is scaled to bring it to max_norm.
/// Returns the norm before scaling.
template <typename T>
double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm);

/// Compares reverse-mode gradients of `loss` against central differences
/// (f(p + eps) - f(p - eps)) / (2 eps) for every coordinate of every tensor
/// in `params`. Returns the largest |a - n| / max(|a|, |n|, 1e-8).
/// `loss` must rebuild the graph on each call and return a scalar.
double grad_check(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> params,
                  double eps = 1e-6);

}  // namespace sepkit::nn
