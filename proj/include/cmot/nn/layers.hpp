#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include "cmot/nn/param.hpp"

namespace cmot::nn {

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    for (auto& v : out_.values()) v = v > T{0} ? v : T{0};
    return out_;
  }
  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(out_[i] > T{0})) gx[i] = T{0};
    return gx;
  }

 private:
  Tensor<T> out_;
};

/// 2x2 max pooling with stride 2 (floor on odd extents).
template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    const Shape4 s = x.shape();
    in_shape_ = s;
    Shape4 os{s.n, s.c, s.h / 2, s.w / 2};
    if (os.h == 0 || os.w == 0) throw ShapeError("maxpool: input too small " + s.str());
    Tensor<T> y(os);
    argmax_.assign(os.size(), 0);
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
      const T* p = x.data() + nc * s.plane();
      for (std::size_t oy = 0; oy < os.h; ++oy)
        for (std::size_t ox = 0; ox < os.w; ++ox, ++o) {
          std::size_t best = (2 * oy) * s.w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = (2 * oy + dy) * s.w + 2 * ox + dx;
              if (p[i] > p[best]) best = i;
            }
          y[o] = p[best];
          argmax_[o] = nc * s.plane() + best;
        }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx(in_shape_);
    for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax_[o]] += gy[o];
    return gx;
  }

 private:
  Shape4 in_shape_{};
  std::vector<std::size_t> argmax_;
};

/// Affine map over flattened samples: y = W x + b, W is (out, in).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, const std::string& group, std::size_t in, std::size_t out)
      : weight_(name + ".weight", group, Shape4{out, in, 1, 1}),
        bias_(name + ".bias", group, Shape4{out, 1, 1, 1}) {}

  std::size_t in_features() const { return weight_.value.shape().c; }
  std::size_t out_features() const { return weight_.value.shape().n; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

  template <typename RngT>
  void init(RngT& rng, double gain = 2.0) {
    init_fan_in(weight_.value, in_features(), rng, gain);
    bias_.value.zero();
  }

  void visit(const ParamVisitor<T>& f) {
    f(weight_);
    f(bias_);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.shape().sample_size() != in_features())
      throw ShapeError(weight_.name + ": expected " + std::to_string(in_features()) +
                       " features, got " + x.shape().str());
    input_ = x;
    const std::size_t n = x.shape().n;
    Tensor<T> y(n, out_features(), 1, 1);
    Eigen::Map<const Mat> xm(x.data(), n, in_features());
    Eigen::Map<const Mat> wm(weight_.value.data(), out_features(), in_features());
    Eigen::Map<Mat> ym(y.data(), n, out_features());
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias_.value.data(), out_features());
    ym.rowwise() += bm;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true, bool param_grad = true) {
    const std::size_t n = gy.shape().n;
    Eigen::Map<const Mat> gm(gy.data(), n, out_features());
    if (param_grad) {
      Eigen::Map<const Mat> xm(input_.data(), n, in_features());
      Eigen::Map<Mat> gw(weight_.grad.data(), out_features(), in_features());
      gw.noalias() += gm.transpose() * xm;
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(bias_.grad.data(), out_features());
      gb += gm.colwise().sum();
    }
    Tensor<T> gx;
    if (input_grad) {
      gx = Tensor<T>(input_.shape());
      Eigen::Map<const Mat> wm(weight_.value.data(), out_features(), in_features());
      Eigen::Map<Mat> gxm(gx.data(), n, in_features());
      gxm.noalias() = gm * wm;
    }
    return gx;
  }

 private:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
};

/// Spatial mean per (sample, channel): (N,C,H,W) -> (N,C,1,1).
template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  const Shape4 s = x.shape();
  Tensor<T> y(s.n, s.c, 1, 1);
  const std::size_t plane = s.plane();
  for (std::size_t i = 0; i < s.n * s.c; ++i) {
    T sum{0};
    const T* p = x.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) sum += p[j];
    y[i] = sum / static_cast<T>(plane);
  }
  return y;
}

template <typename T>
Tensor<T> global_average_pool_backward(const Tensor<T>& gy, const Shape4& in) {
  Tensor<T> gx(in);
  const std::size_t plane = in.plane();
  for (std::size_t i = 0; i < in.n * in.c; ++i) {
    const T g = gy[i] / static_cast<T>(plane);
    T* p = gx.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) p[j] = g;
  }
  return gx;
}

}  // namespace cmot::nn
