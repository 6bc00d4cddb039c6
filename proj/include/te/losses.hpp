#pragma once

#include "te/tensor.hpp"

namespace te {

// Mean squared error over all elements. d_pred receives dL/dpred when non-null.
double mse_loss(const Tensor& pred, const Tensor& target, Tensor* d_pred = nullptr);

// Per-label weighted binary cross-entropy, averaged over rows:
//   L = -(1/N) sum_n sum_i [y log p + (1-y) log(1-p)] * w_i
// Probabilities are clamped to [eps, 1-eps] before the logs; the gradient is
// zero where the clamp is active.
constexpr double kBceClampEps = 1e-7;
double weighted_bce_loss(const Tensor& probs, const Tensor& targets, const Tensor& weights,
                         Tensor* d_probs = nullptr);

}  // namespace te
