#pragma once

// Independent references for the overlap and distance metrics, and the
// hand-built ten-frame fixture with known scores.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"

namespace support {

using cmot::BoundingBox;
using cmot::Image;
using cmot::Modality;
using cmot::Sequence;

// Cells of width `step` whose centres fall inside [lo, lo + len).
inline long covered_cells(double lo, double len, double step, double origin, long n) {
  long c = 0;
  for (long i = 0; i < n; ++i) {
    const double x = origin + (static_cast<double>(i) + 0.5) * step;
    c += x >= lo && x < lo + len;
  }
  return c;
}

inline long covered_both(double a0, double al, double b0, double bl, double step, double origin, long n) {
  long c = 0;
  for (long i = 0; i < n; ++i) {
    const double x = origin + (static_cast<double>(i) + 0.5) * step;
    c += x >= a0 && x < a0 + al && x >= b0 && x < b0 + bl;
  }
  return c;
}

// Overlap by counting 1/100-pixel cells; axis-aligned boxes factor into per-axis counts.
inline double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  const double step = 0.01, origin = 0.0;
  const long n = 4000;  // covers [0, 40)
  const double ia = static_cast<double>(covered_cells(a.x, a.w, step, origin, n)) *
                    static_cast<double>(covered_cells(a.y, a.h, step, origin, n));
  const double ib = static_cast<double>(covered_cells(b.x, b.w, step, origin, n)) *
                    static_cast<double>(covered_cells(b.y, b.h, step, origin, n));
  const double ii = static_cast<double>(covered_both(a.x, a.w, b.x, b.w, step, origin, n)) *
                    static_cast<double>(covered_both(a.y, a.h, b.y, b.h, step, origin, n));
  return ii / (ia + ib - ii);
}

inline Sequence fixture_sequence(std::size_t n, const std::string& id = "fx") {
  Sequence s;
  s.id = id;
  auto img = std::make_shared<Image>(300, 300);
  for (std::size_t i = 0; i < n; ++i) s.frames.push_back({img, Modality::RGB, {0, 0, 100, 100}, true});
  return s;
}

// 6 frames with overlap 0.8 / centre error 5, 4 with overlap 0.2 / centre error 40.
inline std::vector<BoundingBox> fixture_predictions() {
  std::vector<BoundingBox> p(6, BoundingBox{15, 0, 80, 100});
  p.insert(p.end(), 4, BoundingBox{80, 0, 20, 100});
  return p;
}

// Centre distance written out componentwise.
inline double centre_distance(const BoundingBox& a, const BoundingBox& b) {
  const double dx = (a.x + a.w / 2) - (b.x + b.w / 2), dy = (a.y + a.h / 2) - (b.y + b.h / 2);
  return std::sqrt(dx * dx + dy * dy);
}

// Success step curve of the fixture: 1 for t <= 0.2 (11 grid points), 0.6 for
// 0.2 < t <= 0.8 (30 points), 0 above; trapezoid with step 1/50.
inline constexpr double kFixtureSr2 = (11 + 30 * 0.6 - 0.5 * (1 + 0)) / 50.0;

}  // namespace support
