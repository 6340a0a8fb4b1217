#pragma once

#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmot/data/sequence.hpp"
#include "cmot/nn/loss.hpp"
#include "cmot/tracker/network.hpp"
#include "cmot/tracker/sampling.hpp"
#include "cmot/training/freeze.hpp"

namespace cmot::tracker {

struct TrackerConfig {
  std::size_t candidates = 256;
  std::size_t top_k = 5;
  double threshold = 0.0;
  Spread spread{0.3, 0.05};
  /// Spread multiplier after a failed frame and its ceiling (on `spread.xy`).
  double failure_growth = 2.0;
  double max_spread_xy = 1.2;
  double padding = 1.14;

  SampleSpec init_samples{200, 600};
  std::size_t init_iterations = 30;
  double init_lr = 1e-3;
  SampleSpec update_samples{8, 24};
  std::size_t update_iterations = 10;
  double update_lr = 1e-3;
  std::size_t batch_pos = 32;
  std::size_t batch_neg = 96;
  std::size_t long_interval = 10;
  std::size_t short_capacity = 10;  // frames
  std::size_t long_capacity = 100;  // frames

  std::size_t regression_samples = 200;
  double regression_iou = 0.6;
  double ridge_lambda = 1.0;
  bool use_regressor = true;
  /// Bound on the per-frame change of width and height, as a ratio.
  double max_scale_step = 1.25;
};

/// FIFO holding at most `capacity` items; pushing onto a full queue evicts the oldest.
template <typename T>
class BoundedFifo {
 public:
  explicit BoundedFifo(std::size_t capacity = 1) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("FIFO capacity must be positive");
  }
  void push(T v) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(v));
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const std::deque<T>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

/// Cached block-input features of one frame's labelled samples.
struct FrameSamples {
  BlockFeatures pos;
  BlockFeatures neg;
};

/// Ridge regression from backbone features to box deltas
/// (dcx / w, dcy / h, log(w' / w), log(h' / h)), features and targets centred.
struct BoxRegressor {
  Eigen::MatrixXd coef;  // features x 4
  Eigen::VectorXd x_mean;
  Eigen::RowVector4d y_mean = Eigen::RowVector4d::Zero();

  bool fitted() const { return coef.size() > 0; }

  void fit(const Tensor<float>& feats, std::span<const BoundingBox> boxes, const BoundingBox& gt,
           double lambda) {
    const auto n = static_cast<Eigen::Index>(boxes.size());
    const auto d = static_cast<Eigen::Index>(feats.shape().c);
    Eigen::MatrixXd x(n, d);
    Eigen::MatrixXd y(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = feats[static_cast<std::size_t>(i * d + j)];
      const auto& b = boxes[static_cast<std::size_t>(i)];
      y.row(i) << (gt.cx() - b.cx()) / b.w, (gt.cy() - b.cy()) / b.h, std::log(gt.w / b.w),
          std::log(gt.h / b.h);
    }
    x_mean = x.colwise().mean().transpose();
    y_mean = y.colwise().mean();
    x.rowwise() -= x_mean.transpose();
    y.rowwise() -= y_mean;
    Eigen::MatrixXd a = x.transpose() * x;
    a.diagonal().array() += lambda;
    coef = a.ldlt().solve(x.transpose() * y);
  }

  BoundingBox apply(const float* feat, const BoundingBox& b) const {
    const auto d = x_mean.size();
    Eigen::RowVector4d delta = y_mean;
    for (Eigen::Index j = 0; j < d; ++j) delta += (feat[j] - x_mean[j]) * coef.row(j);
    return BoundingBox::from_center(b.cx() + delta[0] * b.w, b.cy() + delta[1] * b.h,
                                    b.w * std::exp(delta[2]), b.h * std::exp(delta[3]));
  }
};

struct TrackerState {
  BoundingBox current;
  std::size_t frame_index = 0;  // 0-based index of the last processed frame
  Spread spread;
  BoundedFifo<FrameSamples> short_memory;
  BoundedFifo<BlockFeatures> long_memory;
  BoxRegressor regressor;
  nn::Sgd<float> optimizer;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
};

enum class UpdateKind { None, Short, Long };

inline std::string to_string(UpdateKind k) {
  return k == UpdateKind::None ? "none" : (k == UpdateKind::Short ? "short" : "long");
}

struct FrameOutcome {
  BoundingBox box;
  double score = 0.0;  // mean of the top-k target scores
  bool success = false;
  UpdateKind update = UpdateKind::None;
};

struct UpdateReport {
  bool performed = false;
  std::string warning;
  double loss_before = 0.0;  // mean loss over the memory batch
  double loss_after = 0.0;
};

namespace detail {

inline std::map<std::string, double> online_groups(const TrackNet& net, double lr) {
  std::map<std::string, double> g{{kGroupHeadHidden, lr}, {kGroupHeadFinal, lr}};
  if (net.has_marmot()) g[marmot::kGroupEnsemble] = lr;
  return g;
}

inline std::vector<int> labels(std::size_t pos, std::size_t neg) {
  std::vector<int> l(pos + neg, 0);
  std::fill(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(pos), 1);
  return l;
}

/// Mean cross-entropy of the fused network over `pos` then `neg` features.
inline double evaluate_loss(TrackNet& net, const BlockFeatures& pos, const BlockFeatures& neg) {
  const BlockFeatures all = concat(pos, neg);
  const auto lab = labels(pos.count(), neg.count());
  return nn::binary_cross_entropy(net.forward_features(all), lab).loss /
         static_cast<double>(lab.size());
}

template <typename RngT>
std::vector<std::size_t> draw(std::size_t available, std::size_t want, RngT& rng) {
  std::vector<std::size_t> idx(available);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < std::min(want, available); ++i) {
    std::uniform_int_distribution<std::size_t> d(i, available - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  idx.resize(std::min(want, available));
  return idx;
}

/// Fine-tunes the ensemble and head on cached features for `iterations` steps.
template <typename RngT>
void fit_features(TrackNet& net, nn::Sgd<float>& opt, const BlockFeatures& pos,
                  const BlockFeatures& neg, const TrackerConfig& cfg, double lr,
                  std::size_t iterations, RngT& rng) {
  const auto binding = training::apply_freeze_mask(net, online_groups(net, lr));
  for (std::size_t it = 0; it < iterations; ++it) {
    const auto pi = draw(pos.count(), cfg.batch_pos, rng);
    const auto ni = draw(neg.count(), cfg.batch_neg, rng);
    const BlockFeatures batch = concat(gather(pos, pi), gather(neg, ni));
    const auto lab = labels(pi.size(), ni.size());
    binding.zero_grad();
    const auto logits = net.forward_features(batch);
    const auto loss = nn::binary_cross_entropy(logits, lab);
    if (!std::isfinite(loss.loss)) throw NumericError("non-finite loss during online update");
    net.backward_features(loss.grad);
    opt.step(binding.entries());
  }
}

inline BlockFeatures extract_boxes(TrackNet& net, const Image& img,
                                   std::span<const BoundingBox> boxes, double padding) {
  return net.extract(crop_patches(img, boxes, net.patch_size(), padding));
}

template <typename RngT>
FrameSamples collect(TrackNet& net, const Image& img, const BoundingBox& target,
                     const SampleSpec& spec, double padding, RngT& rng) {
  const auto lb = sample_labeled(target, spec, img.width(), img.height(), rng);
  return {extract_boxes(net, img, lb.positives, padding),
          extract_boxes(net, img, lb.negatives, padding)};
}

}  // namespace detail

/// Fine-tunes the head (and ensemble) on memory samples. Short updates use the
/// short-term positives; long updates use the long-term positives. Both use the
/// short-term negatives. Backbone and branches are never touched.
inline UpdateReport online_update(TrackerState& state, TrackNet& net, UpdateKind which,
                                  const TrackerConfig& cfg) {
  UpdateReport r;
  BlockFeatures pos, neg;
  for (const auto& f : state.short_memory.items()) {
    if (which == UpdateKind::Short) pos = concat(pos, f.pos);
    neg = concat(neg, f.neg);
  }
  if (which == UpdateKind::Long)
    for (const auto& p : state.long_memory.items()) pos = concat(pos, p);
  if (which == UpdateKind::None || pos.rgb.empty() || neg.rgb.empty()) {
    r.warning = "online update skipped: memory is empty";
    return r;
  }
  Rng rng(derive_seed(state.seed, "update", state.frame_index));
  r.loss_before = detail::evaluate_loss(net, pos, neg);
  detail::fit_features(net, state.optimizer, pos, neg, cfg, cfg.update_lr, cfg.update_iterations,
                       rng);
  r.loss_after = detail::evaluate_loss(net, pos, neg);
  r.performed = true;
  return r;
}

/// Trains head and ensemble on first-frame samples, fits the box regressor and
/// fills the memories. The network's backbone and branches stay fixed.
inline TrackerState init_first_frame(TrackNet& net, const FrameRecord& frame, const BoundingBox& gt,
                                     const TrackerConfig& cfg, std::uint64_t seed) {
  gt.validate();
  const Image& img = *frame.image;
  TrackerState s{gt,
                 0,
                 cfg.spread,
                 BoundedFifo<FrameSamples>(cfg.short_capacity),
                 BoundedFifo<BlockFeatures>(cfg.long_capacity),
                 {},
                 nn::Sgd<float>(),
                 seed,
                 img.width(),
                 img.height()};
  Rng rng(derive_seed(seed, "init"));
  const FrameSamples init = detail::collect(net, img, gt, cfg.init_samples, cfg.padding, rng);
  detail::fit_features(net, s.optimizer, init.pos, init.neg, cfg, cfg.init_lr, cfg.init_iterations,
                       rng);

  if (cfg.use_regressor) {
    std::vector<BoundingBox> boxes;
    const Spread rs{0.3, 0.1};
    for (std::size_t tries = 0; boxes.size() < cfg.regression_samples && tries < 50 * cfg.regression_samples; ++tries) {
      const auto b = fit_to_image(perturb(gt, rs, rng), img.width(), img.height());
      if (iou(b, gt) >= cfg.regression_iou) boxes.push_back(b);
    }
    if (!boxes.empty())
      s.regressor.fit(net.backbone_features(crop_patches(img, boxes, net.patch_size(), cfg.padding)),
                      boxes, gt, cfg.ridge_lambda);
  }

  const FrameSamples mem = detail::collect(net, img, gt, cfg.update_samples, cfg.padding, rng);
  s.short_memory.push(mem);
  s.long_memory.push(mem.pos);
  return s;
}

/// Scores candidates around the previous box and returns the new estimate.
inline FrameOutcome track_frame(TrackerState& state, TrackNet& net, const FrameRecord& frame,
                                const TrackerConfig& cfg) {
  const Image& img = *frame.image;
  const std::size_t t = state.frame_index + 1;
  const double W = img.width(), H = img.height();
  auto cand = sample_candidates(state.current, cfg.candidates, state.spread, W, H,
                                derive_seed(state.seed, "candidates", t));
  const auto patches = crop_patches(img, cand.boxes, net.patch_size(), cfg.padding);
  cand.scores = nn::target_scores(net.forward(patches, Mode::Eval));
  cand.validate();

  std::vector<std::size_t> order(cand.boxes.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(cfg.top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return cand.scores[a] != cand.scores[b] ? cand.scores[a] > cand.scores[b] : a < b;
                    });
  order.resize(k);

  FrameOutcome out;
  for (auto i : order) out.score += cand.scores[i];
  out.score /= static_cast<double>(k);
  out.success = out.score > cfg.threshold;

  auto average = [&](const std::vector<BoundingBox>& bs) {
    double x = 0, y = 0, w = 0, h = 0;
    for (const auto& b : bs) {
      x += b.x;
      y += b.y;
      w += b.w;
      h += b.h;
    }
    const double n = static_cast<double>(bs.size());
    return BoundingBox{x / n, y / n, w / n, h / n};
  };
  std::vector<BoundingBox> top;
  for (auto i : order) top.push_back(cand.boxes[i]);
  BoundingBox box = average(top);

  if (out.success && state.regressor.fitted()) {
    Tensor<float> topk_patches(k, 3, net.patch_size(), net.patch_size());
    const std::size_t ps = topk_patches.shape().sample_size();
    for (std::size_t j = 0; j < k; ++j)
      std::copy_n(patches.sample(order[j]), ps, topk_patches.sample(j));
    const auto feats = net.backbone_features(topk_patches);
    const std::size_t d = feats.shape().c;
    std::vector<BoundingBox> refined;
    for (std::size_t j = 0; j < k; ++j)
      refined.push_back(state.regressor.apply(feats.data() + j * d, top[j]));
    box = average(refined);
  }
  if (box.valid()) {
    const double r = cfg.max_scale_step;
    const double w = std::clamp(box.w, state.current.w / r, state.current.w * r);
    const double h = std::clamp(box.h, state.current.h / r, state.current.h * r);
    box = BoundingBox::from_center(box.cx(), box.cy(), w, h);
  }
  box = fit_to_image(box, W, H);
  if (!box.valid()) {
    // Collapsed estimate: keep the previous box and search wider next frame.
    box = state.current;
    out.success = false;
  }
  out.box = box;
  state.current = box;
  state.frame_index = t;

  if (out.success) {
    state.spread = cfg.spread;
    Rng rng(derive_seed(state.seed, "memory", t));
    try {
      const FrameSamples mem = detail::collect(net, img, box, cfg.update_samples, cfg.padding, rng);
      state.short_memory.push(mem);
      state.long_memory.push(mem.pos);
    } catch (const InsufficientDataError&) {
      // Estimate too large to leave room for negatives: nothing is memorised.
    }
  } else {
    state.spread.xy = std::min(state.spread.xy * cfg.failure_growth, cfg.max_spread_xy);
  }

  if (!out.success) {
    if (online_update(state, net, UpdateKind::Short, cfg).performed) out.update = UpdateKind::Short;
  } else if (cfg.long_interval > 0 && t % cfg.long_interval == 0) {
    if (online_update(state, net, UpdateKind::Long, cfg).performed) out.update = UpdateKind::Long;
  }
  return out;
}

struct TrackResult {
  std::vector<BoundingBox> boxes;
  std::vector<FrameOutcome> frames;
};

/// Runs a whole sequence on a private copy of `net`, initialised from the
/// first frame's ground truth.
inline TrackResult track_sequence(const TrackNet& net, const Sequence& seq,
                                  const TrackerConfig& cfg, std::uint64_t master_seed) {
  seq.validate();
  TrackNet local = net;
  const std::uint64_t seed = derive_seed(master_seed, seq.id);
  TrackerState state = init_first_frame(local, seq.frames.front(), seq.frames.front().gt, cfg, seed);
  TrackResult r;
  r.boxes.push_back(seq.frames.front().gt);
  r.frames.push_back({seq.frames.front().gt, 0.0, true, UpdateKind::None});
  for (std::size_t i = 1; i < seq.size(); ++i) {
    r.frames.push_back(track_frame(state, local, seq.frames[i], cfg));
    r.boxes.push_back(r.frames.back().box);
  }
  return r;
}

}  // namespace cmot::tracker
