#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "cmot/error.hpp"

namespace cmot {

/// Cache-line aligned storage. Vectorised Eigen kernels peel a prefix that
/// depends on the address, so a fixed alignment keeps float summation order,
/// and therefore every result, independent of where the allocator lands.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// (batch, channel, height, width). Dense vectors use (N, F, 1, 1).
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t sample_size() const noexcept { return c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

/// Dense NCHW array with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T{0})
      : Tensor(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* sample(std::size_t n) noexcept { return data_.data() + n * shape_.sample_size(); }
  const T* sample(std::size_t n) const noexcept { return data_.data() + n * shape_.sample_size(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T{0}); }

  void reshape(Shape4 s) {
    if (s.size() != data_.size())
      throw ShapeError("reshape " + shape_.str() + " -> " + s.str() + " changes element count");
    shape_ = s;
  }

  Tensor reshaped(Shape4 s) const {
    Tensor t = *this;
    t.reshape(s);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void require_same_shape(const Tensor& o, const char* op) const {
    if (o.shape_ != shape_)
      throw ShapeError(std::string(op) + ": shape " + shape_.str() + " vs " + o.shape_.str());
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape4 shape_{};
  AlignedVector<T> data_;
};

/// Selects samples [begin, end) along the batch axis.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  Shape4 s = x.shape();
  s.n = end - begin;
  Tensor<T> out(s);
  std::copy(x.sample(begin), x.sample(begin) + s.size(), out.data());
  return out;
}

/// Gathers the listed samples along the batch axis.
template <typename T>
Tensor<T> gather_batch(const Tensor<T>& x, std::span<const std::size_t> idx) {
  Shape4 s = x.shape();
  s.n = idx.size();
  Tensor<T> out(s);
  const std::size_t ss = s.sample_size();
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x.sample(idx[i]), x.sample(idx[i]) + ss, out.sample(i));
  return out;
}

/// Concatenates along the batch axis. All parts must agree on (C, H, W).
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) return {};
  Shape4 s = parts.front().shape();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.shape().c != s.c || p.shape().h != s.h || p.shape().w != s.w)
      throw ShapeError("concat_batch: " + s.str() + " vs " + p.shape().str());
    n += p.shape().n;
  }
  s.n = n;
  Tensor<T> out(s);
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

/// Concatenates two tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape4 sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  Tensor<T> out(sa.n, sa.c + sb.c, sa.h, sa.w);
  for (std::size_t n = 0; n < sa.n; ++n) {
    T* dst = std::copy(a.sample(n), a.sample(n) + sa.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + sb.sample_size(), dst);
  }
  return out;
}

/// Splits channels [0, c) and [c, C) of x.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t c) {
  const Shape4 s = x.shape();
  Tensor<T> a(s.n, c, s.h, s.w), b(s.n, s.c - c, s.h, s.w);
  const std::size_t na = a.shape().sample_size();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy(x.sample(n), x.sample(n) + na, a.sample(n));
    std::copy(x.sample(n) + na, x.sample(n) + s.sample_size(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  a.require_same_shape(b, "max_abs_diff");
  T m{0};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace cmot
