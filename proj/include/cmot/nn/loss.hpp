#pragma once

#include <cmath>
#include <span>

#include "cmot/tensor.hpp"

namespace cmot::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // dL/dlogits
};

/// Two-way softmax cross-entropy summed over the batch. Logits are (N,2,1,1),
/// column 1 is the target class; labels are 0 (background) or 1 (target).
template <typename T>
LossResult<T> binary_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t n = logits.shape().n;
  if (logits.shape().sample_size() != 2 || labels.size() != n)
    throw ShapeError("binary_cross_entropy: logits " + logits.shape().str() + " vs " +
                     std::to_string(labels.size()) + " labels");
  LossResult<T> r;
  r.grad = Tensor<T>(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double l0 = logits[2 * i], l1 = logits[2 * i + 1];
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    const double p1 = std::exp(l1 - lse);
    const int y = labels[i];
    r.loss += lse - (y ? l1 : l0);
    r.grad[2 * i] = static_cast<T>((1.0 - p1) - (y ? 0.0 : 1.0));
    r.grad[2 * i + 1] = static_cast<T>(p1 - (y ? 1.0 : 0.0));
  }
  return r;
}

/// Target score as a log-odds: logit(target) - logit(background).
template <typename T>
std::vector<double> target_scores(const Tensor<T>& logits) {
  std::vector<double> s(logits.shape().n);
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<double>(logits[2 * i + 1]) - static_cast<double>(logits[2 * i]);
  return s;
}

}  // namespace cmot::nn
