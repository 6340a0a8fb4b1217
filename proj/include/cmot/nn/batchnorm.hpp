#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cmot/nn/param.hpp"

namespace cmot::nn {

/// Per-channel normalisation. Batch statistics in training, running statistics otherwise.
template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, const std::string& group, std::size_t channels)
      : scale_(name + ".weight", group, Shape4{channels, 1, 1, 1}),
        shift_(name + ".bias", group, Shape4{channels, 1, 1, 1}),
        running_mean_{name + ".running_mean", Tensor<T>(channels, 1, 1, 1, T{0})},
        running_var_{name + ".running_var", Tensor<T>(channels, 1, 1, 1, T{1})} {
    scale_.value.fill(T{1});
  }

  std::size_t channels() const { return scale_.value.shape().n; }
  Param<T>& scale() { return scale_; }
  Param<T>& shift() { return shift_; }
  Buffer<T>& running_mean() { return running_mean_; }
  Buffer<T>& running_var() { return running_var_; }

  void visit(const ParamVisitor<T>& f) {
    f(scale_);
    f(shift_);
  }
  void visit_buffers(const BufferVisitor<T>& f) {
    f(running_mean_);
    f(running_var_);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const Shape4 s = x.shape();
    if (s.c != channels())
      throw ShapeError(scale_.name + ": expected " + std::to_string(channels()) + " channels, got " +
                       s.str());
    training_ = training;
    const std::size_t plane = s.plane();
    const std::size_t m = s.n * plane;
    inv_std_.assign(s.c, T{0});
    xhat_ = Tensor<T>(s);
    Tensor<T> y(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      double mean, var;
      if (training) {
        double sum = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
          const T* p = x.sample(n) + c * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
          const T* p = x.sample(n) + c * plane;
          for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
        }
        var = sq / static_cast<double>(m);
        const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
        running_mean_.value[c] =
            static_cast<T>((1.0 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
        running_var_.value[c] =
            static_cast<T>((1.0 - kMomentum) * running_var_.value[c] + kMomentum * unbiased);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std_[c] = inv;
      const T g = scale_.value[c], b = shift_.value[c], mu = static_cast<T>(mean);
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x.sample(n) + c * plane;
        T* xh = xhat_.sample(n) + c * plane;
        T* q = y.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          xh[i] = (p[i] - mu) * inv;
          q[i] = g * xh[i] + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true, bool param_grad = true) {
    const Shape4 s = gy.shape();
    const std::size_t plane = s.plane();
    const T m = static_cast<T>(s.n * plane);
    Tensor<T> gx;
    if (input_grad) gx = Tensor<T>(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      T sum_g{0}, sum_gx{0};
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* g = gy.sample(n) + c * plane;
        const T* xh = xhat_.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += g[i];
          sum_gx += g[i] * xh[i];
        }
      }
      if (param_grad) {
        scale_.grad[c] += sum_gx;
        shift_.grad[c] += sum_g;
      }
      if (!input_grad) continue;
      const T k = scale_.value[c] * inv_std_[c];
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* g = gy.sample(n) + c * plane;
        const T* xh = xhat_.sample(n) + c * plane;
        T* out = gx.sample(n) + c * plane;
        if (training_) {
          for (std::size_t i = 0; i < plane; ++i)
            out[i] = k * (g[i] - sum_g / m - xh[i] * sum_gx / m);
        } else {
          for (std::size_t i = 0; i < plane; ++i) out[i] = k * g[i];
        }
      }
    }
    return gx;
  }

 private:
  Param<T> scale_;
  Param<T> shift_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  bool training_ = false;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

}  // namespace cmot::nn
