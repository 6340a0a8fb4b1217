#pragma once

#include <map>
#include <string>
#include <vector>

#include "cmot/nn/param.hpp"

namespace cmot::nn {

/// SGD with momentum and L2 weight decay:
///   v <- momentum * v + (g + decay * w);  w <- w - lr * v
/// Momentum state is keyed by parameter name so it survives copies of the network.
template <typename T>
class Sgd {
 public:
  struct Entry {
    Param<T>* param;
    double lr;
  };

  Sgd(double momentum = 0.9, double weight_decay = 5e-4)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(const std::vector<Entry>& entries) {
    for (const auto& e : entries) {
      auto& p = *e.param;
      auto& v = velocity_[p.name];
      if (v.shape() != p.value.shape()) v = Tensor<T>(p.value.shape());
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]) + weight_decay_ * p.value[i];
        v[i] = static_cast<T>(momentum_ * v[i] + g);
        p.value[i] = static_cast<T>(p.value[i] - e.lr * v[i]);
      }
    }
  }

  void reset() { velocity_.clear(); }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, Tensor<T>> velocity_;
};

}  // namespace cmot::nn
