#pragma once

#include <optional>
#include <string>

#include "cmot/data/types.hpp"
#include "cmot/marmot/branch.hpp"
#include "cmot/marmot/ensemble.hpp"

namespace cmot::marmot {

/// Parameter-group names used by freeze masks and learning-rate maps.
inline constexpr const char* kGroupBranchRgb = "branch_rgb";
inline constexpr const char* kGroupBranchNir = "branch_nir";
inline constexpr const char* kGroupEnsemble = "ensemble";

struct MarmotConfig {
  std::size_t channels = 32;
  std::size_t reduction = 16;
  std::size_t width_floor = 32;
};

/// The modality-aware block: two parallel branches fed with the same input
/// and fused by the ensemble layer. Shape preserving, modality agnostic.
///
/// `forward` takes no modality argument: at tracking time the modality of a frame
/// is unknown. `forward_routed` is for branch-wise training only and skips the ensemble.
template <typename T>
class Marmot {
 public:
  Marmot() = default;
  explicit Marmot(const MarmotConfig& cfg, const std::string& prefix = "marmot")
      : cfg_(cfg),
        branch_rgb_(prefix + ".branch_rgb", kGroupBranchRgb, cfg.channels),
        branch_nir_(prefix + ".branch_nir", kGroupBranchNir, cfg.channels),
        ensemble_(prefix + ".ensemble", kGroupEnsemble, cfg.channels, cfg.reduction,
                  cfg.width_floor) {}

  const MarmotConfig& config() const { return cfg_; }
  std::size_t channels() const { return cfg_.channels; }

  Branch<T>& branch(Modality m) { return m == Modality::RGB ? branch_rgb_ : branch_nir_; }
  Branch<T>& branch_rgb() { return branch_rgb_; }
  Branch<T>& branch_nir() { return branch_nir_; }
  Ensemble<T>& ensemble() { return ensemble_; }

  template <typename RngT>
  void init(RngT& rng) {
    branch_rgb_.init(rng);
    branch_nir_.init(rng);
    ensemble_.init(rng);
  }

  void visit(const nn::ParamVisitor<T>& f) {
    branch_rgb_.visit(f);
    branch_nir_.visit(f);
    ensemble_.visit(f);
  }
  void visit_buffers(const nn::BufferVisitor<T>& f) {
    branch_rgb_.visit_buffers(f);
    branch_nir_.visit_buffers(f);
  }

  bool any_trainable() const {
    return !branch_rgb_.frozen() || !branch_nir_.frozen() || !ensemble_.frozen();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    route_.reset();
    Tensor<T> f_rgb = branch_rgb_.forward(x, mode);
    Tensor<T> f_nir = branch_nir_.forward(x, mode);
    return ensemble_.forward(f_rgb, f_nir);
  }

  /// Output of a single branch, ensemble skipped.
  Tensor<T> forward_routed(const Tensor<T>& x, Modality m, Mode mode) {
    route_ = m;
    return branch(m).forward(x, mode);
  }

  /// Back-propagates through whatever the last forward evaluated.
  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true) {
    if (route_) return branch(*route_).backward(gy, input_grad);
    const bool need_branch_in = input_grad || !branch_rgb_.frozen() || !branch_nir_.frozen();
    auto g = ensemble_.backward(gy, need_branch_in);
    if (!need_branch_in) return {};
    Tensor<T> gx = branch_rgb_.backward(g.f_rgb, input_grad);
    Tensor<T> gx_nir = branch_nir_.backward(g.f_nir, input_grad);
    if (!input_grad) return {};
    gx += gx_nir;
    return gx;
  }

 private:
  MarmotConfig cfg_{};
  Branch<T> branch_rgb_;
  Branch<T> branch_nir_;
  Ensemble<T> ensemble_;
  std::optional<Modality> route_;
};

}  // namespace cmot::marmot
