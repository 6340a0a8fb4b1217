#pragma once

#include <string>

#include "cmot/nn/batchnorm.hpp"
#include "cmot/nn/conv2d.hpp"
#include "cmot/nn/layers.hpp"

namespace cmot::marmot {

using nn::Mode;

/// Bias-free convolution followed by batch normalisation and rectification.
template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, const std::string& group, nn::ConvGeometry g)
      : conv_(name, group, without_bias(g)), bn_(name + ".bn", group, g.out_channels) {}

  nn::Conv2d<T>& conv() { return conv_; }
  nn::BatchNorm2d<T>& bn() { return bn_; }

  template <typename RngT>
  void init(RngT& rng) {
    conv_.init(rng);
  }

  void visit(const nn::ParamVisitor<T>& f) {
    conv_.visit(f);
    bn_.visit(f);
  }
  void visit_buffers(const nn::BufferVisitor<T>& f) { bn_.visit_buffers(f); }

  Tensor<T> forward(const Tensor<T>& x, bool bn_training) {
    return relu_.forward(bn_.forward(conv_.forward(x), bn_training));
  }

  Tensor<T> backward(const Tensor<T>& gy, bool input_grad, bool param_grad) {
    Tensor<T> g = bn_.backward(relu_.backward(gy), true, param_grad);
    return conv_.backward(g, input_grad, param_grad);
  }

 private:
  static nn::ConvGeometry without_bias(nn::ConvGeometry g) {
    g.bias = false;
    return g;
  }

  nn::Conv2d<T> conv_;
  nn::BatchNorm2d<T> bn_;
  nn::ReLU<T> relu_;
};

/// Modality-aware branch: an entry 1x1 unit, then two half-width flows
/// (1x1 reduce -> 3x3 with dilation 1 or 2), concatenated and added back
/// onto the block input. Spatial extent and channel count are preserved.
template <typename T>
class Branch {
 public:
  Branch() = default;

  /// `prefix` is the canonical name root, e.g. "marmot.branch_rgb".
  Branch(const std::string& prefix, const std::string& group, std::size_t channels)
      : channels_(channels) {
    if (channels == 0 || channels % 2 != 0)
      throw ConfigError("modality-aware branch needs an even channel count, got " +
                        std::to_string(channels));
    const std::size_t half = channels / 2;
    entry_ = ConvBnRelu<T>(prefix + ".entry_1x1", group, {channels, channels, 1, 1, 0, 1});
    reduce_a_ = ConvBnRelu<T>(prefix + ".reduce_a", group, {channels, half, 1, 1, 0, 1});
    reduce_b_ = ConvBnRelu<T>(prefix + ".reduce_b", group, {channels, half, 1, 1, 0, 1});
    spatial_a_ = ConvBnRelu<T>(prefix + ".spatial_a", group, {half, half, 3, 1, 1, 1});
    spatial_b_ = ConvBnRelu<T>(prefix + ".spatial_b", group, {half, half, 3, 1, 2, 2});
  }

  std::size_t channels() const { return channels_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  ConvBnRelu<T>& entry() { return entry_; }
  ConvBnRelu<T>& reduce_a() { return reduce_a_; }
  ConvBnRelu<T>& reduce_b() { return reduce_b_; }
  ConvBnRelu<T>& spatial_a() { return spatial_a_; }
  ConvBnRelu<T>& spatial_b() { return spatial_b_; }

  template <typename RngT>
  void init(RngT& rng) {
    for (auto* u : units()) u->init(rng);
  }

  void visit(const nn::ParamVisitor<T>& f) {
    for (auto* u : units()) u->visit(f);
  }
  void visit_buffers(const nn::BufferVisitor<T>& f) {
    for (auto* u : units()) u->visit_buffers(f);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.shape().c != channels_)
      throw ShapeError("branch: expected " + std::to_string(channels_) + " channels, got " +
                       x.shape().str());
    const bool bn_train = mode == Mode::Train && !frozen_;
    Tensor<T> u = entry_.forward(x, bn_train);
    Tensor<T> a = spatial_a_.forward(reduce_a_.forward(u, bn_train), bn_train);
    Tensor<T> b = spatial_b_.forward(reduce_b_.forward(u, bn_train), bn_train);
    Tensor<T> y = concat_channels(a, b);
    y += x;
    return y;
  }

  /// Gradient of the loss w.r.t. the branch input; parameter gradients are
  /// accumulated unless the branch is frozen.
  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true) {
    const bool pg = !frozen_;
    if (!pg && !input_grad) return {};
    auto [ga, gb] = split_channels(gy, channels_ / 2);
    Tensor<T> gu = reduce_a_.backward(spatial_a_.backward(ga, true, pg), true, pg);
    gu += reduce_b_.backward(spatial_b_.backward(gb, true, pg), true, pg);
    Tensor<T> gx = entry_.backward(gu, input_grad, pg);
    if (!input_grad) return {};
    gx += gy;
    return gx;
  }

 private:
  std::array<ConvBnRelu<T>*, 5> units() {
    return {&entry_, &reduce_a_, &reduce_b_, &spatial_a_, &spatial_b_};
  }

  std::size_t channels_ = 0;
  bool frozen_ = false;
  ConvBnRelu<T> entry_, reduce_a_, reduce_b_, spatial_a_, spatial_b_;
};

}  // namespace cmot::marmot
