#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "cmot/nn/layers.hpp"

namespace cmot::marmot {

/// Width of the squeezed descriptor: max(channels / reduction, floor).
inline std::size_t ensemble_width(std::size_t channels, std::size_t reduction = 16,
                                  std::size_t floor = 32) {
  if (reduction == 0) throw ConfigError("ensemble reduction ratio must be positive");
  return std::max<std::size_t>({channels / reduction, floor, 1});
}

/// Selective fusion of the two branch outputs with per-channel weights that
/// sum to one:
///   s = GAP(f_rgb + f_nir),  z = relu(reduce_fc(s)),
///   (a, b) = softmax(head_rgb(z), head_nir(z)),  v = a*f_rgb + b*f_nir.
/// Evaluated as v = f_nir + a*(f_rgb - f_nir), so agreeing inputs pass through exactly.
template <typename T>
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(const std::string& prefix, const std::string& group, std::size_t channels,
           std::size_t reduction = 16, std::size_t floor = 32)
      : channels_(channels),
        reduce_fc_(prefix + ".reduce_fc", group, channels, ensemble_width(channels, reduction, floor)),
        head_rgb_(prefix + ".head_rgb", group, ensemble_width(channels, reduction, floor), channels),
        head_nir_(prefix + ".head_nir", group, ensemble_width(channels, reduction, floor), channels) {}

  std::size_t channels() const { return channels_; }
  std::size_t width() const { return reduce_fc_.out_features(); }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  nn::Linear<T>& reduce_fc() { return reduce_fc_; }
  nn::Linear<T>& head_rgb() { return head_rgb_; }
  nn::Linear<T>& head_nir() { return head_nir_; }

  template <typename RngT>
  void init(RngT& rng) {
    reduce_fc_.init(rng);
    head_rgb_.init(rng, 1.0);
    head_nir_.init(rng, 1.0);
  }

  void visit(const nn::ParamVisitor<T>& f) {
    reduce_fc_.visit(f);
    head_rgb_.visit(f);
    head_nir_.visit(f);
  }

  /// Per-(sample, channel) weight of the RGB branch from the last forward, shape (N,C,1,1).
  /// The NIR weight is 1 - a.
  const Tensor<T>& rgb_weights() const { return a_; }

  Tensor<T> forward(const Tensor<T>& f_rgb, const Tensor<T>& f_nir) {
    f_rgb.require_same_shape(f_nir, "ensemble");
    if (f_rgb.shape().c != channels_)
      throw ShapeError("ensemble: expected " + std::to_string(channels_) + " channels, got " +
                       f_rgb.shape().str());
    const Shape4 s = f_rgb.shape();
    in_shape_ = s;
    diff_ = Tensor<T>(s);
    Tensor<T> sum(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      sum[i] = f_rgb[i] + f_nir[i];
      diff_[i] = f_rgb[i] - f_nir[i];
    }
    Tensor<T> pooled = nn::global_average_pool(sum);
    Tensor<T> z = relu_.forward(reduce_fc_.forward(pooled));
    Tensor<T> g_rgb = head_rgb_.forward(z);
    Tensor<T> g_nir = head_nir_.forward(z);
    a_ = Tensor<T>(s.n, s.c, 1, 1);
    for (std::size_t i = 0; i < a_.size(); ++i) {
      const double d = static_cast<double>(g_nir[i]) - static_cast<double>(g_rgb[i]);
      a_[i] = static_cast<T>(1.0 / (1.0 + std::exp(d)));
    }
    Tensor<T> v(s);
    const std::size_t plane = s.plane();
    for (std::size_t i = 0; i < s.n * s.c; ++i) {
      const T a = a_[i];
      for (std::size_t j = 0; j < plane; ++j) {
        const std::size_t k = i * plane + j;
        v[k] = f_nir[k] + a * diff_[k];
      }
    }
    return v;
  }

  struct Grads {
    Tensor<T> f_rgb;
    Tensor<T> f_nir;
  };

  /// Input gradients (empty when `input_grad` is false); accumulates parameter
  /// gradients unless frozen.
  Grads backward(const Tensor<T>& gv, bool input_grad = true) {
    const Shape4 s = in_shape_;
    const std::size_t plane = s.plane();
    const bool pg = !frozen_;
    Grads out;
    if (input_grad) {
      out.f_rgb = Tensor<T>(s);
      out.f_nir = Tensor<T>(s);
      for (std::size_t i = 0; i < s.n * s.c; ++i) {
        const T a = a_[i];
        for (std::size_t j = 0; j < plane; ++j) {
          const std::size_t k = i * plane + j;
          out.f_rgb[k] = a * gv[k];
          out.f_nir[k] = (T{1} - a) * gv[k];
        }
      }
    }
    if (!pg && !input_grad) return out;

    // d v / d a = f_rgb - f_nir; a = sigmoid(g_rgb - g_nir).
    Tensor<T> g_logit(s.n, s.c, 1, 1);
    for (std::size_t i = 0; i < s.n * s.c; ++i) {
      T ga{0};
      for (std::size_t j = 0; j < plane; ++j) ga += gv[i * plane + j] * diff_[i * plane + j];
      g_logit[i] = ga * a_[i] * (T{1} - a_[i]);
    }
    Tensor<T> g_neg = g_logit;
    for (auto& v : g_neg.values()) v = -v;
    Tensor<T> gz = head_rgb_.backward(g_logit, true, pg);
    gz += head_nir_.backward(g_neg, true, pg);
    Tensor<T> gpool = reduce_fc_.backward(relu_.backward(gz), input_grad, pg);
    if (input_grad) {
      gpool.reshape({s.n, s.c, 1, 1});
      Tensor<T> gsum = nn::global_average_pool_backward(gpool, s);
      out.f_rgb += gsum;
      out.f_nir += gsum;
    }
    return out;
  }

 private:
  std::size_t channels_ = 0;
  bool frozen_ = false;
  nn::Linear<T> reduce_fc_, head_rgb_, head_nir_;
  nn::ReLU<T> relu_;
  Shape4 in_shape_{};
  Tensor<T> diff_;
  Tensor<T> a_;
};

}  // namespace cmot::marmot
