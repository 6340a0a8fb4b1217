#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"
#include "cmot/data/stats.hpp"
#include "cmot/eval/metrics.hpp"

namespace cmot::eval {

/// Curve grids are index based: distance i (pixels, 0..distance_max),
/// normalised i / 100 (0..norm_max), overlap i / overlap_steps (0..1).
struct EvalConfig {
  int pr_threshold = 20;           // pixels
  double npr_threshold = 0.2;      // ground-truth-relative distance
  double sr_threshold = 0.5;       // overlap
  int distance_max = 50;
  int norm_max = 50;               // in hundredths
  int overlap_steps = 50;

  static std::size_t on_grid(double v, double step, int max, const char* what) {
    const double k = std::round(v / step);
    if (k < 0 || k > max || std::abs(k * step - v) > 1e-9)
      throw ConfigError(std::string(what) + " threshold " + std::to_string(v) + " is not on its curve grid");
    return static_cast<std::size_t>(k);
  }
  std::size_t pr_index() const { return on_grid(pr_threshold, 1.0, distance_max, "precision"); }
  std::size_t npr_index() const { return on_grid(npr_threshold, 0.01, norm_max, "normalised precision"); }
  std::size_t sr_index() const { return on_grid(sr_threshold, 1.0 / overlap_steps, overlap_steps, "success"); }

  void validate() const {
    if (distance_max < 1 || norm_max < 1 || overlap_steps < 1) throw ConfigError("empty curve grid");
    pr_index();
    npr_index();
    sr_index();
  }

  std::vector<double> distance_grid() const {
    std::vector<double> g;
    for (int i = 0; i <= distance_max; ++i) g.push_back(i);
    return g;
  }
  std::vector<double> norm_grid() const {
    std::vector<double> g;
    for (int i = 0; i <= norm_max; ++i) g.push_back(i / 100.0);
    return g;
  }
  std::vector<double> overlap_grid() const {
    std::vector<double> g;
    for (int i = 0; i <= overlap_steps; ++i) g.push_back(static_cast<double>(i) / overlap_steps);
    return g;
  }
};

struct Scores {
  double pr = 0.0;
  double npr = 0.0;
  double sr1 = 0.0;
  double sr2 = 0.0;
  std::size_t frames = 0;

  bool operator==(const Scores&) const = default;
};

struct Curves {
  std::vector<double> distance_thresholds;
  std::vector<double> precision;
  std::vector<double> norm_thresholds;
  std::vector<double> norm_precision;
  std::vector<double> overlap_thresholds;
  std::vector<double> success;

  bool operator==(const Curves&) const = default;
};

struct EvalReport {
  std::string tracker;
  std::size_t sequences = 0;
  Scores overall;
  Curves curves;
  std::map<std::string, Scores> per_attribute;   // attribute name -> scores
  std::map<std::string, Scores> per_switch_bin;  // switch bin name -> scores

  bool operator==(const EvalReport&) const = default;
};

/// Per-frame errors of one sequence.
struct FrameErrors {
  std::vector<double> overlap;
  std::vector<double> center;
  std::vector<double> norm_center;  // ground-truth-relative (1.0 = one box size)
};

inline FrameErrors frame_errors(const std::vector<BoundingBox>& pred, const Sequence& seq) {
  if (pred.size() != seq.size())
    throw ValidationError("results for '" + seq.id + "' have " + std::to_string(pred.size()) +
                          " boxes, sequence has " + std::to_string(seq.size()) + " frames");
  FrameErrors e;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& gt = seq.frames[i].gt;
    e.overlap.push_back(iou(pred[i], gt));
    e.center.push_back(center_error(pred[i], gt));
    e.norm_center.push_back(norm_center_error(pred[i], gt) / 100.0);
  }
  return e;
}

/// Fraction of values at or below each threshold.
inline std::vector<double> precision_curve(const std::vector<double>& err, const std::vector<double>& grid) {
  std::vector<double> c(grid.size(), 0.0);
  if (err.empty()) return c;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t n = 0;
    for (double e : err) n += e <= grid[i];
    c[i] = static_cast<double>(n) / static_cast<double>(err.size());
  }
  return c;
}

/// Fraction of frames with overlap at least the threshold; frames without any
/// overlap never count, so a fully lost tracker scores zero everywhere.
inline std::vector<double> success_curve(const std::vector<double>& overlap, const std::vector<double>& grid) {
  std::vector<double> c(grid.size(), 0.0);
  if (overlap.empty()) return c;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t n = 0;
    for (double o : overlap) n += o > 0.0 && o >= grid[i];
    c[i] = static_cast<double>(n) / static_cast<double>(overlap.size());
  }
  return c;
}

/// Trapezoidal area under `y(x)`.
inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double a = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return a;
}

inline Curves curves_of(const FrameErrors& e, const EvalConfig& cfg) {
  Curves c;
  c.distance_thresholds = cfg.distance_grid();
  c.norm_thresholds = cfg.norm_grid();
  c.overlap_thresholds = cfg.overlap_grid();
  c.precision = precision_curve(e.center, c.distance_thresholds);
  c.norm_precision = precision_curve(e.norm_center, c.norm_thresholds);
  c.success = success_curve(e.overlap, c.overlap_thresholds);
  return c;
}

inline Scores scores_of(const Curves& c, std::size_t frames, const EvalConfig& cfg) {
  Scores s;
  s.frames = frames;
  s.pr = c.precision[cfg.pr_index()];
  s.npr = c.norm_precision[cfg.npr_index()];
  s.sr1 = c.success[cfg.sr_index()];
  s.sr2 = trapezoid(c.overlap_thresholds, c.success);
  return s;
}

inline void append(FrameErrors& dst, const FrameErrors& src) {
  dst.overlap.insert(dst.overlap.end(), src.overlap.begin(), src.overlap.end());
  dst.center.insert(dst.center.end(), src.center.begin(), src.center.end());
  dst.norm_center.insert(dst.norm_center.end(), src.norm_center.begin(), src.norm_center.end());
}

/// Pools frames over `dataset`; every sequence needs an entry in `results`.
inline EvalReport evaluate(const std::map<std::string, std::vector<BoundingBox>>& results,
                           const std::vector<Sequence>& dataset, const EvalConfig& cfg = {},
                           const std::string& tracker = "tracker") {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("nothing to evaluate: dataset is empty");
  FrameErrors all;
  std::map<std::string, FrameErrors> by_attr, by_bin;
  for (const auto& seq : dataset) {
    const auto it = results.find(seq.id);
    if (it == results.end()) throw ValidationError("missing results for sequence '" + seq.id + "'");
    const FrameErrors e = frame_errors(it->second, seq);
    append(all, e);
    for (auto a : seq.attributes) append(by_attr[std::string(to_string(a))], e);
    append(by_bin[to_string(switch_bin(modality_switch_count(seq)))], e);
  }
  EvalReport r;
  r.tracker = tracker;
  r.sequences = dataset.size();
  r.curves = curves_of(all, cfg);
  r.overall = scores_of(r.curves, all.overlap.size(), cfg);
  for (const auto& [k, e] : by_attr) r.per_attribute[k] = scores_of(curves_of(e, cfg), e.overlap.size(), cfg);
  for (const auto& [k, e] : by_bin) r.per_switch_bin[k] = scores_of(curves_of(e, cfg), e.overlap.size(), cfg);
  return r;
}

}  // namespace cmot::eval
