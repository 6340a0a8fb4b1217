#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cmot/data/image.hpp"
#include "cmot/eval/metrics.hpp"
#include "cmot/rng.hpp"
#include "cmot/tensor.hpp"

namespace cmot::tracker {

/// Gaussian spread of candidate boxes: centre sigma as a fraction of the
/// mean side length, and sigma of the log scale factor.
struct Spread {
  double xy = 0.0;
  double scale = 0.0;
};

struct CandidateSet {
  std::vector<BoundingBox> boxes;
  std::vector<double> scores;  // empty or one per box

  void validate() const {
    if (boxes.empty()) throw ValidationError("candidate set is empty");
    if (!scores.empty() && scores.size() != boxes.size())
      throw ValidationError("candidate scores do not match boxes");
    for (double s : scores)
      if (!std::isfinite(s)) throw NumericError("non-finite candidate score");
  }
};

/// Keeps the size (capped at the image size, floored at one pixel) and shifts
/// the box inside [0,W) x [0,H).
inline BoundingBox fit_to_image(BoundingBox b, double width, double height) {
  b.w = std::clamp(b.w, 1.0, width);
  b.h = std::clamp(b.h, 1.0, height);
  b.x = std::clamp(b.x, 0.0, width - b.w);
  b.y = std::clamp(b.y, 0.0, height - b.h);
  return b;
}

template <typename RngT>
BoundingBox perturb(const BoundingBox& prev, const Spread& spread, RngT& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double side = 0.5 * (prev.w + prev.h);
  const double dx = n01(rng) * spread.xy * side;
  const double dy = n01(rng) * spread.xy * side;
  const double s = std::exp(n01(rng) * spread.scale);
  return BoundingBox::from_center(prev.cx() + dx, prev.cy() + dy, prev.w * s, prev.h * s);
}

/// `n` boxes drawn around `prev` in (centre, log-scale), fitted to the image.
inline CandidateSet sample_candidates(const BoundingBox& prev, std::size_t n, const Spread& spread,
                                      double width, double height, std::uint64_t seed) {
  if (n == 0) throw ConfigError("candidate count must be at least 1");
  Rng rng(seed);
  CandidateSet out;
  out.boxes.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.boxes.push_back(fit_to_image(perturb(prev, spread, rng), width, height));
  return out;
}

struct LabeledBoxes {
  std::vector<BoundingBox> positives;  // IoU >= pos_iou with the target
  std::vector<BoundingBox> negatives;  // IoU <= neg_iou with the target
};

struct SampleSpec {
  std::size_t positives = 4;
  std::size_t negatives = 12;
  double pos_iou = 0.7;
  double neg_iou = 0.3;
  Spread pos_spread{0.1, 0.1};
  Spread neg_spread{1.0, 0.3};
  /// Fraction of negatives drawn uniformly over the whole image.
  double uniform_negatives = 0.5;
  std::size_t max_attempts = 200;
};

/// Rejection-samples labelled boxes around `target`. Throws InsufficientDataError
/// when the image leaves no room for the requested negatives.
template <typename RngT>
LabeledBoxes sample_labeled(const BoundingBox& target, const SampleSpec& spec, double width,
                            double height, RngT& rng) {
  LabeledBoxes out;
  const BoundingBox t = fit_to_image(target, width, height);
  for (std::size_t tries = 0; out.positives.size() < spec.positives; ++tries) {
    if (tries >= spec.max_attempts * spec.positives) {
      out.positives.push_back(t);
      continue;
    }
    const auto b = fit_to_image(perturb(t, spec.pos_spread, rng), width, height);
    if (iou(b, t) >= spec.pos_iou) out.positives.push_back(b);
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto n_uniform =
      static_cast<std::size_t>(std::lround(spec.uniform_negatives * static_cast<double>(spec.negatives)));
  for (std::size_t tries = 0; out.negatives.size() < spec.negatives; ++tries) {
    if (tries >= spec.max_attempts * spec.negatives)
      throw InsufficientDataError("image " + std::to_string(int(width)) + "x" +
                                  std::to_string(int(height)) +
                                  " too small to sample negatives around the target");
    BoundingBox b;
    if (out.negatives.size() < n_uniform) {
      b = BoundingBox::from_center(u01(rng) * width, u01(rng) * height, t.w, t.h);
    } else {
      b = perturb(t, spec.neg_spread, rng);
    }
    b = fit_to_image(b, width, height);
    if (iou(b, t) <= spec.neg_iou) out.negatives.push_back(b);
  }
  return out;
}

/// Crops each box enlarged by `padding` (about its centre) and resamples it
/// bilinearly to `size` x `size`, replicating border pixels. Output values are
/// intensities shifted to [-0.5, 0.5], layout (N, 3, size, size).
inline Tensor<float> crop_patches(const Image& img, std::span<const BoundingBox> boxes,
                                  std::size_t size, double padding = 1.14) {
  Tensor<float> out(boxes.size(), 3, size, size);
  const cv::Mat src(img.height(), img.width(), CV_8UC3,
                    const_cast<std::uint8_t*>(img.bytes().data()));
  cv::Mat dst(static_cast<int>(size), static_cast<int>(size), CV_8UC3);
  const std::size_t plane = size * size;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& b = boxes[k];
    const double w = std::max(b.w * padding, 1.0), h = std::max(b.h * padding, 1.0);
    const double sx = w / static_cast<double>(size), sy = h / static_cast<double>(size);
    // dst pixel centre (u + 0.5) maps to x0 + (u + 0.5) * sx in source pixel-centre coordinates.
    const double x0 = b.cx() - 0.5 * w - 0.5 + 0.5 * sx;
    const double y0 = b.cy() - 0.5 * h - 0.5 + 0.5 * sy;
    const cv::Matx23d m(sx, 0, x0, 0, sy, y0);
    cv::warpAffine(src, dst, m, dst.size(), cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                   cv::BORDER_REPLICATE);
    float* o = out.sample(k);
    for (std::size_t y = 0; y < size; ++y) {
      const auto* row = dst.ptr<cv::Vec3b>(static_cast<int>(y));
      for (std::size_t x = 0; x < size; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          o[c * plane + y * size + x] = static_cast<float>(row[x][c]) * (1.0f / 255.0f) - 0.5f;
    }
  }
  return out;
}

}  // namespace cmot::tracker
