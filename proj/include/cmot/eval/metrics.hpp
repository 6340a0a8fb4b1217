#pragma once

#include <algorithm>
#include <cmath>

#include "cmot/data/types.hpp"

namespace cmot {

/// Intersection over union of two axis-aligned boxes; 0 when disjoint.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Euclidean distance between box centres, in pixels.
inline double center_error(const BoundingBox& a, const BoundingBox& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

/// Centre error measured in units of the ground-truth size, scaled so that a
/// 100x100 ground-truth box reads in pixels: 100 * |(dcx / gt.w, dcy / gt.h)|.
inline double norm_center_error(const BoundingBox& pred, const BoundingBox& gt) {
  if (!(gt.w > 0.0) || !(gt.h > 0.0) || !std::isfinite(gt.w) || !std::isfinite(gt.h))
    throw ValidationError("normalised centre error needs a ground-truth box with positive size");
  return 100.0 * std::hypot((pred.cx() - gt.cx()) / gt.w, (pred.cy() - gt.cy()) / gt.h);
}

}  // namespace cmot
