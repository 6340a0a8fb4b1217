#pragma once

#include <algorithm>

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cmot/nn/param.hpp"

namespace cmot::nn {

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  bool bias = true;

  std::size_t out_extent(std::size_t in) const {
    const std::size_t span = dilation * (kernel - 1) + 1;
    if (in + 2 * padding < span)
      throw ShapeError("conv: input extent " + std::to_string(in) + " smaller than kernel span");
    return (in + 2 * padding - span) / stride + 1;
  }
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Output columns [lo, hi) whose input column ox*stride + off - padding lies in [0, w).
inline void valid_range(std::size_t wo, std::size_t w, std::size_t stride, std::size_t off,
                        std::size_t padding, std::size_t& lo, std::size_t& hi) {
  const long s = static_cast<long>(stride), base = static_cast<long>(off) - static_cast<long>(padding);
  long l = base >= 0 ? 0 : (-base + s - 1) / s;
  long h = (static_cast<long>(w) - 1 - base) < 0 ? 0 : (static_cast<long>(w) - 1 - base) / s + 1;
  l = std::min<long>(l, static_cast<long>(wo));
  h = std::clamp<long>(h, l, static_cast<long>(wo));
  lo = static_cast<std::size_t>(l);
  hi = static_cast<std::size_t>(h);
}

// cols is (C*k*k) x (Ho*Wo) with row stride `ld` (>= Ho*Wo), row-major.
template <typename T>
void im2col(const T* x, std::size_t h, std::size_t w, const ConvGeometry& g, std::size_t ho,
            std::size_t wo, T* cols, std::size_t ld) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * ld;
        std::size_t lo, hi;
        valid_range(wo, w, g.stride, kx * g.dilation, g.padding, lo, hi);
        const long shift = static_cast<long>(kx * g.dilation) - static_cast<long>(g.padding);
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky * g.dilation) - static_cast<long>(g.padding);
          T* out = row + oy * wo;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(out, out + wo, T{0});
            continue;
          }
          const T* in_row = plane + iy * w;
          std::fill(out, out + lo, T{0});
          if (g.stride == 1) {
            std::copy(in_row + (static_cast<long>(lo) + shift), in_row + (static_cast<long>(hi) + shift), out + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox)
              out[ox] = in_row[static_cast<long>(ox * g.stride) + shift];
          }
          std::fill(out + hi, out + wo, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t h, std::size_t w, const ConvGeometry& g, std::size_t ho,
                std::size_t wo, T* x, std::size_t ld) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * ld;
        std::size_t lo, hi;
        valid_range(wo, w, g.stride, kx * g.dilation, g.padding, lo, hi);
        const long shift = static_cast<long>(kx * g.dilation) - static_cast<long>(g.padding);
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky * g.dilation) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          T* in_row = plane + iy * w;
          const T* src = row + oy * wo;
          for (std::size_t ox = lo; ox < hi; ++ox) in_row[static_cast<long>(ox * g.stride) + shift] += src[ox];
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D convolution via im2col and one GEMM per chunk of samples. Caches its last input.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, const std::string& group, ConvGeometry g) : geom_(g) {
    weight_ = Param<T>(name + ".weight", group,
                       Shape4{g.out_channels, g.in_channels, g.kernel, g.kernel});
    if (g.bias) bias_ = Param<T>(name + ".bias", group, Shape4{g.out_channels, 1, 1, 1});
  }

  const ConvGeometry& geometry() const { return geom_; }
  Param<T>& weight() { return weight_; }
  const Param<T>& weight() const { return weight_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return geom_.bias; }

  template <typename RngT>
  void init(RngT& rng) {
    init_fan_in(weight_.value, geom_.patch_size(), rng);
    if (geom_.bias) bias_.value.zero();
  }

  void visit(const ParamVisitor<T>& f) {
    f(weight_);
    if (geom_.bias) f(bias_);
  }

  Shape4 output_shape(const Shape4& in) const {
    return {in.n, geom_.out_channels, geom_.out_extent(in.h), geom_.out_extent(in.w)};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.shape().c != geom_.in_channels)
      throw ShapeError(weight_.name + ": expected " + std::to_string(geom_.in_channels) +
                       " input channels, got " + x.shape().str());
    input_ = x;
    const Shape4 os = output_shape(x.shape());
    Tensor<T> y(os);
    const std::size_t p = os.h * os.w, k = geom_.patch_size(), o = geom_.out_channels;
    detail::CMapMat<T> wmat(weight_.value.data(), o, k);
    const std::size_t chunk = chunk_size(k, p);
    detail::RowMat<T> ybuf;
    for (std::size_t n0 = 0; n0 < os.n; n0 += chunk) {
      const std::size_t nb = std::min(chunk, os.n - n0), len = nb * p;
      fill_cols(n0, nb, os, len);
      detail::CMapMat<T> cmat(cols_.data(), k, len);
      ybuf.noalias() = wmat * cmat;
      for (std::size_t j = 0; j < nb; ++j) {
        T* dst = y.sample(n0 + j);
        for (std::size_t c = 0; c < o; ++c) {
          const T b = geom_.bias ? bias_.value[c] : T{0};
          const T* src = ybuf.data() + c * len + j * p;
          for (std::size_t i = 0; i < p; ++i) dst[c * p + i] = src[i] + b;
        }
      }
    }
    return y;
  }

  /// Accumulates parameter gradients when `param_grad`; returns dL/dx when `input_grad`.
  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true, bool param_grad = true) {
    const Shape4 is = input_.shape();
    const Shape4 os = gy.shape();
    const std::size_t p = os.h * os.w, k = geom_.patch_size(), o = geom_.out_channels;
    Tensor<T> gx;
    if (input_grad) gx = Tensor<T>(is);
    if (!input_grad && !param_grad) return gx;
    detail::CMapMat<T> wmat(weight_.value.data(), o, k);
    detail::MapMat<T> gw(weight_.grad.data(), o, k);
    const std::size_t chunk = chunk_size(k, p);
    detail::RowMat<T> gyb, gcols;
    for (std::size_t n0 = 0; n0 < os.n; n0 += chunk) {
      const std::size_t nb = std::min(chunk, os.n - n0), len = nb * p;
      gyb.resize(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(len));
      for (std::size_t j = 0; j < nb; ++j) {
        const T* src = gy.sample(n0 + j);
        for (std::size_t c = 0; c < o; ++c)
          std::copy_n(src + c * p, p, gyb.data() + c * len + j * p);
      }
      if (param_grad) {
        fill_cols(n0, nb, os, len);
        detail::CMapMat<T> cmat(cols_.data(), k, len);
        gw.noalias() += gyb * cmat.transpose();
        if (geom_.bias)
          for (std::size_t c = 0; c < o; ++c) bias_.grad[c] += gyb.row(static_cast<Eigen::Index>(c)).sum();
      }
      if (input_grad) {
        gcols.noalias() = wmat.transpose() * gyb;
        for (std::size_t j = 0; j < nb; ++j) {
          T* dst = gx.sample(n0 + j);
          if (is_pointwise()) {
            for (std::size_t c = 0; c < k; ++c)
              std::copy_n(gcols.data() + c * len + j * p, p, dst + c * p);
          } else {
            detail::col2im_add(gcols.data() + j * p, is.h, is.w, geom_, os.h, os.w, dst, len);
          }
        }
      }
    }
    return gx;
  }

 private:
  bool is_pointwise() const {
    return geom_.kernel == 1 && geom_.stride == 1 && geom_.padding == 0;
  }

  /// Samples per GEMM so that the column buffer stays near 2^20 entries.
  static std::size_t chunk_size(std::size_t k, std::size_t p) {
    return std::max<std::size_t>(1, (std::size_t{1} << 16) / std::max<std::size_t>(1, k * p));
  }

  /// Column matrix (k x len) of samples [n0, n0 + nb) of the cached input.
  void fill_cols(std::size_t n0, std::size_t nb, const Shape4& os, std::size_t len) {
    const Shape4 is = input_.shape();
    const std::size_t p = os.h * os.w, k = geom_.patch_size();
    cols_.resize(k * len);
    for (std::size_t j = 0; j < nb; ++j) {
      const T* src = input_.sample(n0 + j);
      if (is_pointwise()) {
        for (std::size_t c = 0; c < k; ++c) std::copy_n(src + c * p, p, cols_.data() + c * len + j * p);
      } else {
        detail::im2col(src, is.h, is.w, geom_, os.h, os.w, cols_.data() + j * p, len);
      }
    }
  }

  ConvGeometry geom_{};
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
  AlignedVector<T> cols_;
};

}  // namespace cmot::nn
