#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"
#include "cmot/nn/checkpoint.hpp"
#include "cmot/nn/loss.hpp"
#include "cmot/nn/sgd.hpp"
#include "cmot/rng.hpp"
#include "cmot/tracker/network.hpp"
#include "cmot/tracker/sampling.hpp"
#include "cmot/training/freeze.hpp"

namespace cmot::training {

enum class DataFilter { All, RgbOnly, NirOnly, Mixed };

inline std::string to_string(DataFilter f) {
  switch (f) {
    case DataFilter::All: return "all";
    case DataFilter::RgbOnly: return "rgb_only";
    case DataFilter::NirOnly: return "nir_only";
    case DataFilter::Mixed: return "mixed";
  }
  return "all";
}

inline DataFilter parse_data_filter(const std::string& s) {
  if (s == "all") return DataFilter::All;
  if (s == "rgb_only") return DataFilter::RgbOnly;
  if (s == "nir_only") return DataFilter::NirOnly;
  if (s == "mixed") return DataFilter::Mixed;
  throw ConfigError("unknown data filter '" + s + "'");
}

/// Forward path a stage trains through.
enum class StageRoute {
  Bypass,       // block skipped
  Alternating,  // even iterations RGB through branch_rgb, odd NIR through branch_nir
  Fused,        // full block, no modality label
};

inline std::string to_string(StageRoute r) {
  return r == StageRoute::Bypass ? "bypass" : (r == StageRoute::Alternating ? "alternating" : "fused");
}

/// Trainable groups are exactly the keys of `lr`.
struct StageConfig {
  std::string stage;  // "I", "II", "III" or "one"
  std::map<std::string, double> lr;
  std::size_t iterations = 1;
  DataFilter data_filter = DataFilter::All;
  StageRoute route = StageRoute::Fused;

  std::set<std::string> trainable() const {
    std::set<std::string> s;
    for (const auto& [g, v] : expand_groups(lr)) s.insert(g);
    return s;
  }

  void validate() const {
    if (iterations < 1) throw ConfigError("stage " + stage + ": iterations must be at least 1");
    if (lr.empty()) throw ConfigError("stage " + stage + ": nothing to train");
    for (const auto& [g, v] : expand_groups(lr)) {
      if (std::find(all_groups().begin(), all_groups().end(), g) == all_groups().end())
        throw ConfigError("stage " + stage + ": unknown parameter group '" + g + "'");
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError("stage " + stage + ": learning rate for '" + g + "' must be positive");
    }
    if (route == StageRoute::Alternating && data_filter != DataFilter::All)
      throw ConfigError("stage " + stage + ": alternating route draws its own modality subsets");
  }

  /// Same stage restricted to groups the network defines. Empty when none remain.
  StageConfig restricted_to(const tracker::TrackNet& net) const {
    StageConfig c = *this;
    c.lr.clear();
    const auto present = net.groups();
    for (const auto& [g, v] : expand_groups(lr))
      if (std::find(present.begin(), present.end(), g) != present.end()) c.lr[g] = v;
    if (!net.has_marmot() && c.route == StageRoute::Alternating) c.route = StageRoute::Fused;
    return c;
  }
};

struct TrainingConfig {
  double base_lr = 1e-3;
  std::size_t stage1_iterations = 500;
  double stage2_lr = 1e-4;
  std::size_t stage2_iterations = 1000;
  std::size_t stage3_iterations = 500;
  /// Zero means the sum of the three stages' iterations.
  std::size_t one_stage_iterations = 0;
  std::size_t frames_per_batch = 8;
  tracker::SampleSpec samples{};  // per frame: 4 positives, 12 negatives
  double padding = 1.14;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(base_lr > 0) || !(stage2_lr > 0)) throw ConfigError("learning rates must be positive");
    if (frames_per_batch < 2 || frames_per_batch % 2 != 0)
      throw ConfigError("frames_per_batch must be even and at least 2");
    if (samples.positives == 0 || samples.negatives == 0)
      throw ConfigError("each frame must contribute positives and negatives");
  }
};

/// Stage I: backbone and head at one tenth of the base rate, block skipped.
inline StageConfig stage1_config(const TrainingConfig& tc) {
  const double lr = tc.base_lr / 10.0;
  return {"I", {{tracker::kGroupBackbone, lr}, {"head", lr}}, tc.stage1_iterations, DataFilter::All,
          StageRoute::Bypass};
}

/// Stage II: both branches plus the head's final layer, each branch fed only its modality.
inline StageConfig stage2_config(const TrainingConfig& tc) {
  return {"II",
          {{marmot::kGroupBranchRgb, tc.stage2_lr},
           {marmot::kGroupBranchNir, tc.stage2_lr},
           {tracker::kGroupHeadFinal, tc.stage2_lr}},
          tc.stage2_iterations,
          DataFilter::All,
          StageRoute::Alternating};
}

/// Stage III: ensemble at the branch rate, head at the stage-I rate, mixed batches.
inline StageConfig stage3_config(const TrainingConfig& tc) {
  return {"III",
          {{marmot::kGroupEnsemble, tc.stage2_lr}, {"head", tc.base_lr / 10.0}},
          tc.stage3_iterations,
          DataFilter::Mixed,
          StageRoute::Fused};
}

/// Ablation: every group jointly at the stage-I rate, for the combined iteration budget.
inline StageConfig one_stage_config(const TrainingConfig& tc) {
  const double lr = tc.base_lr / 10.0;
  std::map<std::string, double> all;
  for (const auto& g : all_groups()) all[g] = lr;
  const std::size_t it = tc.one_stage_iterations
                             ? tc.one_stage_iterations
                             : tc.stage1_iterations + tc.stage2_iterations + tc.stage3_iterations;
  return {"one", all, it, DataFilter::All, StageRoute::Fused};
}

/// Training frame addressed by (sequence, frame).
struct FrameRef {
  std::size_t sequence = 0;
  std::size_t frame = 0;
  Modality modality = Modality::RGB;
};

struct ModalitySplit {
  std::vector<FrameRef> rgb;
  std::vector<FrameRef> nir;
};

/// Partitions every frame by its modality label. Frames whose target is not
/// visible are still counted; samplers skip them.
inline ModalitySplit split_by_modality(const std::vector<Sequence>& dataset) {
  if (dataset.empty()) throw InsufficientDataError("training set is empty");
  ModalitySplit s;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t j = 0; j < dataset[i].size(); ++j) {
      const FrameRef r{i, j, dataset[i].frames[j].modality};
      (r.modality == Modality::RGB ? s.rgb : s.nir).push_back(r);
    }
  return s;
}

struct TrainBatch {
  Tensor<float> patches;
  std::vector<int> labels;
  std::vector<Modality> modalities;

  std::size_t size() const { return labels.size(); }
  std::size_t count(Modality m) const {
    return static_cast<std::size_t>(std::count(modalities.begin(), modalities.end(), m));
  }
};

/// Seeded frame sampler. Pools hold visible frames only; `Mixed` draws half of
/// each batch's frames from each modality.
class BatchSampler {
 public:
  BatchSampler(const std::vector<Sequence>& dataset, const TrainingConfig& tc, std::uint64_t seed)
      : data_(&dataset), tc_(tc), rng_(seed) {
    const auto split = split_by_modality(dataset);
    for (const auto* pool : {&split.rgb, &split.nir})
      for (const auto& r : *pool)
        if (dataset[r.sequence].frames[r.frame].visible)
          (r.modality == Modality::RGB ? rgb_ : nir_).push_back(r);
    all_ = rgb_;
    all_.insert(all_.end(), nir_.begin(), nir_.end());
    std::sort(all_.begin(), all_.end(), [](const FrameRef& a, const FrameRef& b) {
      return a.sequence != b.sequence ? a.sequence < b.sequence : a.frame < b.frame;
    });
  }

  std::size_t pool_size(DataFilter f) const {
    switch (f) {
      case DataFilter::RgbOnly: return rgb_.size();
      case DataFilter::NirOnly: return nir_.size();
      case DataFilter::Mixed: return std::min(rgb_.size(), nir_.size());
      case DataFilter::All: return all_.size();
    }
    return 0;
  }

  /// Throws InsufficientDataError naming `purpose` when the filter's pool is empty.
  void require(DataFilter f, const std::string& purpose) const {
    if (pool_size(f) == 0)
      throw InsufficientDataError(purpose + ": no " + (f == DataFilter::Mixed ? "RGB and NIR" : to_string(f)) +
                                  " training frames");
  }

  TrainBatch next(DataFilter f, std::size_t patch_size) {
    require(f, "batch sampler");
    std::vector<FrameRef> frames;
    const std::size_t n = tc_.frames_per_batch;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<FrameRef>* pool = &all_;
      if (f == DataFilter::RgbOnly || (f == DataFilter::Mixed && i < n / 2)) pool = &rgb_;
      if (f == DataFilter::NirOnly || (f == DataFilter::Mixed && i >= n / 2)) pool = &nir_;
      std::uniform_int_distribution<std::size_t> d(0, pool->size() - 1);
      frames.push_back((*pool)[d(rng_)]);
    }
    return make_batch(frames, patch_size);
  }

 private:
  TrainBatch make_batch(const std::vector<FrameRef>& frames, std::size_t patch_size) {
    TrainBatch b;
    std::vector<Tensor<float>> parts;
    for (const auto& r : frames) {
      const auto& seq = (*data_)[r.sequence];
      const auto& fr = seq.frames[r.frame];
      const auto lb = tracker::sample_labeled(fr.gt, tc_.samples, fr.image->width(),
                                              fr.image->height(), rng_);
      std::vector<BoundingBox> boxes = lb.positives;
      boxes.insert(boxes.end(), lb.negatives.begin(), lb.negatives.end());
      parts.push_back(tracker::crop_patches(*fr.image, boxes, patch_size, tc_.padding));
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        b.labels.push_back(i < lb.positives.size() ? 1 : 0);
        b.modalities.push_back(fr.modality);
      }
    }
    b.patches = concat_batch(std::span<const Tensor<float>>(parts));
    return b;
  }

  const std::vector<Sequence>* data_;
  TrainingConfig tc_;
  Rng rng_;
  std::vector<FrameRef> rgb_, nir_, all_;
};

struct StageResult {
  StageConfig config;
  std::uint64_t seed = 0;
  std::vector<double> losses;  // mean per-sample loss of each iteration

  /// Mean loss over the first / last tenth of the iterations (at least one).
  double initial_loss() const { return window_mean(true); }
  double final_loss() const { return window_mean(false); }

 private:
  double window_mean(bool head) const {
    if (losses.empty()) return 0.0;
    const std::size_t k = std::max<std::size_t>(1, losses.size() / 10);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += losses[head ? i : losses.size() - 1 - i];
    return s / static_cast<double>(k);
  }
};

/// Called after every iteration with (iteration, mean loss).
using ProgressFn = std::function<void(std::size_t, double)>;

/// Generic stage loop: binds the mask, samples batches per the route and
/// filter, and steps SGD. On a non-finite loss or parameter the network is
/// restored to its last finite state, written to `divergence_checkpoint`
/// when given, and NumericError is thrown.
inline StageResult run_stage(tracker::TrackNet& net, BatchSampler& sampler, const StageConfig& requested,
                             const TrainingConfig& tc, std::uint64_t seed,
                             const std::optional<std::filesystem::path>& divergence_checkpoint = {},
                             const ProgressFn& progress = {}) {
  const StageConfig cfg = requested.restricted_to(net);
  cfg.validate();
  if (cfg.route == StageRoute::Alternating) {
    sampler.require(DataFilter::RgbOnly, "stage " + cfg.stage + " (" + marmot::kGroupBranchRgb + ")");
    sampler.require(DataFilter::NirOnly, "stage " + cfg.stage + " (" + marmot::kGroupBranchNir + ")");
  } else {
    sampler.require(cfg.data_filter, "stage " + cfg.stage);
  }
  OptimizerBinding binding = apply_freeze_mask(net, cfg.lr);
  nn::Sgd<float> opt(tc.momentum, tc.weight_decay);
  StageResult res{cfg, seed, {}};
  nn::Checkpoint last_finite = nn::capture(net);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    TrainBatch batch;
    tracker::TrackNet::Route route = tracker::TrackNet::Route::fused();
    if (cfg.route == StageRoute::Bypass) {
      route = tracker::TrackNet::Route::bypass();
      batch = sampler.next(cfg.data_filter, net.patch_size());
    } else if (cfg.route == StageRoute::Alternating) {
      const Modality m = it % 2 == 0 ? Modality::RGB : Modality::NIR;
      route = tracker::TrackNet::Route::branch(m);
      batch = sampler.next(m == Modality::RGB ? DataFilter::RgbOnly : DataFilter::NirOnly, net.patch_size());
    } else {
      batch = sampler.next(cfg.data_filter, net.patch_size());
    }
    binding.zero_grad();
    const auto logits = net.forward(batch.patches, nn::Mode::Train, route);
    const auto loss = nn::binary_cross_entropy(logits, batch.labels);
    bool finite = std::isfinite(loss.loss);
    if (finite) {
      net.backward(loss.grad);
      opt.step(binding.entries());
      net.visit([&](nn::Param<float>& p) {
        if (finite && cfg.lr.count(p.group))
          for (std::size_t i = 0; i < p.value.size(); ++i)
            if (!std::isfinite(p.value[i])) {
              finite = false;
              break;
            }
      });
    }
    if (!finite) {
      nn::restore(net, last_finite);
      if (divergence_checkpoint) nn::save_checkpoint(*divergence_checkpoint, last_finite);
      throw NumericError("stage " + cfg.stage + " diverged at iteration " + std::to_string(it + 1));
    }
    last_finite = nn::capture(net);
    const double mean = loss.loss / static_cast<double>(batch.size());
    res.losses.push_back(mean);
    if (progress) progress(it, mean);
  }
  net.set_trainable({});
  return res;
}

inline StageResult run_stage1(tracker::TrackNet& net, const std::vector<Sequence>& dataset,
                              const TrainingConfig& tc) {
  BatchSampler s(dataset, tc, derive_seed(tc.seed, "stage-I"));
  return run_stage(net, s, stage1_config(tc), tc, derive_seed(tc.seed, "stage-I"));
}

inline StageResult run_stage2(tracker::TrackNet& net, const std::vector<Sequence>& dataset,
                              const TrainingConfig& tc) {
  BatchSampler s(dataset, tc, derive_seed(tc.seed, "stage-II"));
  return run_stage(net, s, stage2_config(tc), tc, derive_seed(tc.seed, "stage-II"));
}

inline StageResult run_stage3(tracker::TrackNet& net, const std::vector<Sequence>& dataset,
                              const TrainingConfig& tc) {
  BatchSampler s(dataset, tc, derive_seed(tc.seed, "stage-III"));
  return run_stage(net, s, stage3_config(tc), tc, derive_seed(tc.seed, "stage-III"));
}

enum class Schedule { Three, One };

inline std::vector<StageConfig> schedule_configs(Schedule s, const TrainingConfig& tc) {
  if (s == Schedule::One) return {one_stage_config(tc)};
  return {stage1_config(tc), stage2_config(tc), stage3_config(tc)};
}

struct PipelineResult {
  std::vector<StageResult> stages;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the schedule in order; with `out_dir` set writes `stage1.ckpt`... (or
/// `one.ckpt`) after each stage and `divergence.ckpt` on failure.
inline PipelineResult train_pipeline(tracker::TrackNet& net, const std::vector<Sequence>& dataset,
                                     const TrainingConfig& tc, Schedule schedule,
                                     const std::optional<std::filesystem::path>& out_dir = {},
                                     const ProgressFn& progress = {}) {
  tc.validate();
  PipelineResult r;
  const auto configs = schedule_configs(schedule, tc);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    const std::uint64_t seed = derive_seed(tc.seed, "stage-" + c.stage);
    BatchSampler sampler(dataset, tc, seed);
    std::optional<std::filesystem::path> div;
    if (out_dir) div = *out_dir / "divergence.ckpt";
    r.stages.push_back(run_stage(net, sampler, c, tc, seed, div, progress));
    if (out_dir) {
      const auto path =
          *out_dir / (schedule == Schedule::One ? std::string("one.ckpt") : "stage" + std::to_string(i + 1) + ".ckpt");
      nn::save_checkpoint(path, nn::capture(net));
      r.checkpoints.push_back(path);
    }
  }
  return r;
}

}  // namespace cmot::training
