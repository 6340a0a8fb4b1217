#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cmot/error.hpp"
#include "cmot/marmot/marmot.hpp"
#include "cmot/nn/conv2d.hpp"
#include "cmot/nn/layers.hpp"

namespace cmot::tracker {

using nn::Mode;

inline constexpr const char* kGroupBackbone = "backbone";
inline constexpr const char* kGroupHeadHidden = "head_hidden";
/// The last head layer, the only non-block parameters trained in the branch stage.
inline constexpr const char* kGroupHeadFinal = "head_final";

struct ConvLayerSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool pool = false;
};

/// Conv layers (conv, ReLU, optional 2x2 max-pool) with the block placed after
/// layer `insertion_points[i]` (1-based). Only single-insertion specs build.
struct BackboneSpec {
  std::string name = "classification";
  std::size_t in_channels = 3;
  std::size_t patch_size = 32;
  std::vector<ConvLayerSpec> layers;
  std::vector<std::size_t> insertion_points;

  std::size_t channels_after(std::size_t layer) const {
    return layer == 0 ? in_channels : layers.at(layer - 1).out_channels;
  }

  /// Spatial extent after `layer` layers for the configured patch size.
  std::size_t extent_after(std::size_t layer) const {
    std::size_t s = patch_size;
    for (std::size_t i = 0; i < layer; ++i) {
      const auto& l = layers[i];
      const nn::ConvGeometry g{channels_after(i), l.out_channels, l.kernel, l.stride, l.padding};
      s = g.out_extent(s);
      if (l.pool) s /= 2;
    }
    return s;
  }

  void validate() const {
    if (layers.empty()) throw ConfigError("backbone has no layers");
    if (insertion_points.empty()) throw ConfigError("backbone has no insertion point");
    for (auto k : insertion_points) {
      if (k < 1 || k > layers.size())
        throw ConfigError("insertion point " + std::to_string(k) + " outside [1, " +
                          std::to_string(layers.size()) + "]");
      if (channels_after(k) % 2 != 0)
        throw ConfigError("odd channel count " + std::to_string(channels_after(k)) +
                          " at insertion point " + std::to_string(k));
    }
    std::size_t s = patch_size;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0)
        throw ConfigError("backbone layer " + std::to_string(i + 1) + " is degenerate");
      s = nn::ConvGeometry{channels_after(i), l.out_channels, l.kernel, l.stride, l.padding}
              .out_extent(s);
      if (l.pool) s /= 2;
      if (s == 0) throw ConfigError("patch too small for backbone layer " + std::to_string(i + 1));
    }
  }
};

/// Small classification backbone used throughout the toolkit: 32x32 patch,
/// three conv layers, block after the third.
inline BackboneSpec classification_preset() {
  BackboneSpec s;
  s.layers = {{16, 5, 2, 2, true}, {32, 3, 1, 1, true}, {32, 3, 1, 1, false}};
  s.insertion_points = {3};
  return s;
}

/// Regression-style layout with blocks after the third and fourth stages.
/// Descriptive only: `TrackNet` rejects specs with more than one insertion point.
inline BackboneSpec regression_preset() {
  BackboneSpec s;
  s.name = "regression";
  s.patch_size = 288;
  s.layers = {{64, 7, 2, 3, true}, {256, 3, 1, 1, false}, {512, 3, 2, 1, false},
              {1024, 3, 2, 1, false}, {2048, 3, 2, 1, false}};
  s.insertion_points = {3, 4};
  return s;
}

struct NetConfig {
  BackboneSpec backbone = classification_preset();
  /// False builds the identity-substituted baseline: no block parameters exist.
  bool use_marmot = true;
  std::size_t reduction = 16;
  std::size_t width_floor = 32;
  std::size_t head_hidden = 64;
};

/// Block inputs reached from cached backbone features. With the block
/// present, `rgb`/`nir` are the two branch outputs; without it only `rgb` is
/// set and holds the backbone features at the insertion point.
struct BlockFeatures {
  Tensor<float> rgb;
  Tensor<float> nir;

  std::size_t count() const { return rgb.shape().n; }
};

inline BlockFeatures gather(const BlockFeatures& f, std::span<const std::size_t> idx) {
  BlockFeatures out;
  out.rgb = gather_batch(f.rgb, idx);
  if (!f.nir.empty()) out.nir = gather_batch(f.nir, idx);
  return out;
}

inline BlockFeatures concat(const BlockFeatures& a, const BlockFeatures& b) {
  if (a.rgb.empty()) return b;
  if (b.rgb.empty()) return a;
  BlockFeatures out;
  const Tensor<float> r[] = {a.rgb, b.rgb};
  out.rgb = concat_batch<float>(r);
  if (!a.nir.empty()) {
    const Tensor<float> n[] = {a.nir, b.nir};
    out.nir = concat_batch<float>(n);
  }
  return out;
}

/// backbone[1..k] -> block -> backbone[k+1..] -> fc(hidden) -> ReLU -> fc(2).
/// Layers cache activations for backward, so one instance serves one thread.
class TrackNet {
 public:
  explicit TrackNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    const auto& spec = cfg_.backbone;
    spec.validate();
    if (spec.insertion_points.size() != 1)
      throw ConfigError("backbone '" + spec.name + "' has " +
                        std::to_string(spec.insertion_points.size()) +
                        " insertion points; this pipeline supports exactly one");
    insertion_ = spec.insertion_points.front();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const auto& l = spec.layers[i];
      convs_.emplace_back("backbone.conv" + std::to_string(i + 1), kGroupBackbone,
                          nn::ConvGeometry{spec.channels_after(i), l.out_channels, l.kernel,
                                           l.stride, l.padding, 1, true});
    }
    relus_.resize(spec.layers.size());
    pools_.resize(spec.layers.size());
    if (cfg_.use_marmot)
      block_.emplace(marmot::MarmotConfig{spec.channels_after(insertion_), cfg_.reduction,
                                          cfg_.width_floor});
    const std::size_t e = spec.extent_after(spec.layers.size());
    flat_ = spec.layers.back().out_channels * e * e;
    fc1_ = nn::Linear<float>("head.fc1", kGroupHeadHidden, flat_, cfg_.head_hidden);
    fc2_ = nn::Linear<float>("head.fc2", kGroupHeadFinal, cfg_.head_hidden, 2);
  }

  TrackNet(const TrackNet&) = default;
  TrackNet& operator=(const TrackNet&) = default;

  const NetConfig& config() const { return cfg_; }
  std::size_t insertion_point() const { return insertion_; }
  std::size_t patch_size() const { return cfg_.backbone.patch_size; }
  bool has_marmot() const { return block_.has_value(); }
  marmot::Marmot<float>& block() {
    if (!block_) throw ConfigError("network was built without the modality-aware block");
    return *block_;
  }
  nn::Linear<float>& head_hidden() { return fc1_; }
  nn::Linear<float>& head_final() { return fc2_; }

  std::vector<std::string> groups() const {
    std::vector<std::string> g{kGroupBackbone};
    if (block_) g.insert(g.end(), {marmot::kGroupBranchRgb, marmot::kGroupBranchNir,
                                   marmot::kGroupEnsemble});
    g.insert(g.end(), {kGroupHeadHidden, kGroupHeadFinal});
    return g;
  }

  template <typename RngT>
  void init(RngT& rng) {
    for (auto& c : convs_) c.init(rng);
    if (block_) block_->init(rng);
    fc1_.init(rng);
    fc2_.init(rng, 1.0);
  }

  void visit(const nn::ParamVisitor<float>& f) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].visit(f);
      if (i + 1 == insertion_ && block_) block_->visit(f);
    }
    fc1_.visit(f);
    fc2_.visit(f);
  }
  void visit_buffers(const nn::BufferVisitor<float>& f) {
    if (block_) block_->visit_buffers(f);
  }

  std::size_t parameter_count(const std::string& group = "") {
    std::size_t n = 0;
    visit([&](nn::Param<float>& p) {
      if (group.empty() || p.group == group) n += p.value.size();
    });
    return n;
  }

  /// Groups receiving parameter gradients; others are evaluated as constants
  /// (and block units in eval-mode normalisation).
  void set_trainable(const std::set<std::string>& groups) {
    trainable_ = groups;
    if (block_) {
      block_->branch_rgb().set_frozen(!groups.count(marmot::kGroupBranchRgb));
      block_->branch_nir().set_frozen(!groups.count(marmot::kGroupBranchNir));
      block_->ensemble().set_frozen(!groups.count(marmot::kGroupEnsemble));
    }
  }
  const std::set<std::string>& trainable() const { return trainable_; }
  bool is_trainable(const std::string& g) const { return trainable_.count(g) > 0; }

  /// How the block is evaluated: fused (normal), one branch only, or skipped.
  struct Route {
    enum Kind { Fused, Branch, Bypass } kind = Fused;
    Modality modality = Modality::RGB;
    static Route fused() { return {}; }
    static Route branch(Modality m) { return {Branch, m}; }
    static Route bypass() { return {Bypass, Modality::RGB}; }
  };

  /// Full forward from image patches (N, 3, P, P) to logits (N, 2, 1, 1).
  Tensor<float> forward(const Tensor<float>& patches, Mode mode, Route route = Route::fused()) {
    route_ = route;
    Tensor<float> x = stem(patches);
    if (block_ && route.kind == Route::Fused) x = block_->forward(x, mode);
    if (block_ && route.kind == Route::Branch) x = block_->forward_routed(x, route.modality, mode);
    return tail(x);
  }

  /// Back-propagates d(loss)/d(logits) through the last `forward`, accumulating
  /// gradients of trainable groups only.
  void backward(const Tensor<float>& glogits) {
    const bool stem_trainable = is_trainable(kGroupBackbone);
    const bool block_active = block_ && route_.kind != Route::Bypass;
    const bool block_trainable = block_active && block_->any_trainable();
    Tensor<float> g = tail_backward(glogits, stem_trainable || block_trainable);
    if (g.empty()) return;
    if (block_active) g = block_->backward(g, stem_trainable);
    if (stem_trainable) stem_backward(g);
  }

  /// Features at the block input, then branch outputs (eval mode).
  BlockFeatures extract(const Tensor<float>& patches) {
    BlockFeatures f;
    Tensor<float> x = stem(patches);
    if (!block_) {
      f.rgb = std::move(x);
      return f;
    }
    f.rgb = block_->branch_rgb().forward(x, Mode::Eval);
    f.nir = block_->branch_nir().forward(x, Mode::Eval);
    return f;
  }

  /// Ensemble, remaining backbone layers and head over cached branch outputs.
  Tensor<float> forward_features(const BlockFeatures& f) {
    route_ = Route::fused();
    if (!block_) return tail(f.rgb);
    return tail(block_->ensemble().forward(f.rgb, f.nir));
  }

  /// Backward matching `forward_features`: head and ensemble gradients only.
  void backward_features(const Tensor<float>& glogits) {
    const bool need = block_ && !block_->ensemble().frozen();
    Tensor<float> g = tail_backward(glogits, need);
    if (need) block_->ensemble().backward(g, false);
  }

  /// Flattened backbone features at the block input (never trained online).
  Tensor<float> backbone_features(const Tensor<float>& patches) {
    Tensor<float> x = stem(patches);
    const Shape4 s = x.shape();
    return x.reshaped({s.n, s.sample_size(), 1, 1});
  }

 private:
  Tensor<float> layer_forward(std::size_t i, const Tensor<float>& x) {
    Tensor<float> y = relus_[i].forward(convs_[i].forward(x));
    if (cfg_.backbone.layers[i].pool) y = pools_[i].forward(y);
    return y;
  }

  Tensor<float> layer_backward(std::size_t i, Tensor<float> g, bool input_grad) {
    if (cfg_.backbone.layers[i].pool) g = pools_[i].backward(g);
    return convs_[i].backward(relus_[i].backward(g), input_grad, is_trainable(kGroupBackbone));
  }

  Tensor<float> stem(const Tensor<float>& patches) {
    if (patches.shape().c != cfg_.backbone.in_channels ||
        patches.shape().h != patch_size() || patches.shape().w != patch_size())
      throw ShapeError("network expects patches (N, " + std::to_string(cfg_.backbone.in_channels) +
                       ", " + std::to_string(patch_size()) + ", " + std::to_string(patch_size()) +
                       "), got " + patches.shape().str());
    Tensor<float> x = patches;
    for (std::size_t i = 0; i < insertion_; ++i) x = layer_forward(i, x);
    return x;
  }

  void stem_backward(Tensor<float> g) {
    for (std::size_t i = insertion_; i-- > 0;) g = layer_backward(i, std::move(g), i > 0);
  }

  Tensor<float> post_block(Tensor<float> x) {
    for (std::size_t i = insertion_; i < convs_.size(); ++i) x = layer_forward(i, x);
    return x;
  }

  Tensor<float> tail(const Tensor<float>& block_out) {
    Tensor<float> x = post_block(block_out);
    post_shape_ = x.shape();
    x.reshape({post_shape_.n, post_shape_.sample_size(), 1, 1});
    return fc2_.forward(relu_head_.forward(fc1_.forward(x)));
  }

  /// Returns d/d(block output) when `input_grad`.
  Tensor<float> tail_backward(const Tensor<float>& glogits, bool input_grad) {
    const bool hidden = is_trainable(kGroupHeadHidden);
    const bool need_fc1_in = input_grad || hidden;
    Tensor<float> g = fc2_.backward(glogits, need_fc1_in, is_trainable(kGroupHeadFinal));
    if (!need_fc1_in) return {};
    g = fc1_.backward(relu_head_.backward(g), input_grad, hidden);
    if (!input_grad) return {};
    g.reshape(post_shape_);
    const bool post_trainable = is_trainable(kGroupBackbone);
    for (std::size_t i = convs_.size(); i-- > insertion_;) {
      if (cfg_.backbone.layers[i].pool) g = pools_[i].backward(g);
      g = convs_[i].backward(relus_[i].backward(g), true, post_trainable);
    }
    return g;
  }

  NetConfig cfg_;
  std::size_t insertion_ = 0;
  std::size_t flat_ = 0;
  std::vector<nn::Conv2d<float>> convs_;
  std::vector<nn::ReLU<float>> relus_;
  std::vector<nn::MaxPool2<float>> pools_;
  std::optional<marmot::Marmot<float>> block_;
  nn::Linear<float> fc1_;
  nn::ReLU<float> relu_head_;
  nn::Linear<float> fc2_;
  std::set<std::string> trainable_;
  Route route_{};
  Shape4 post_shape_{};
};

inline TrackNet build_network(const BackboneSpec& spec, bool use_marmot = true) {
  NetConfig cfg;
  cfg.backbone = spec;
  cfg.use_marmot = use_marmot;
  return TrackNet(cfg);
}

}  // namespace cmot::tracker
