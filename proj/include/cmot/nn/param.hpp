#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cmot/tensor.hpp"

namespace cmot::nn {

/// A learnable array with its accumulated gradient. `group` names the
/// freeze/learning-rate group the parameter belongs to.
template <typename T>
struct Param {
  std::string name;
  std::string group;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, std::string g, Shape4 shape)
      : name(std::move(n)), group(std::move(g)), value(shape), grad(shape) {}

  void zero_grad() { grad.zero(); }
};

/// Non-learnable state that still belongs in a checkpoint (running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T> value;
};

/// Train: batch statistics and cached activations for backward.
/// Eval: running statistics; frozen parameters are always evaluated this way.
enum class Mode { Train, Eval };

template <typename T>
using ParamVisitor = std::function<void(Param<T>&)>;
template <typename T>
using BufferVisitor = std::function<void(Buffer<T>&)>;

/// He-normal initialisation scaled by fan-in.
template <typename T, typename RngT>
void init_fan_in(Tensor<T>& w, std::size_t fan_in, RngT& rng, double gain = 2.0) {
  std::normal_distribution<double> dist(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
}

/// Order-sensitive digest of parameter bits; equal digests mean bit-identical values.
template <typename T>
std::uint64_t bit_digest(const Tensor<T>& t, std::uint64_t h = 1469598103934665603ull) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cmot::nn
