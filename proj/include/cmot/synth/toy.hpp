#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"
#include "cmot/data/stats.hpp"
#include "cmot/rng.hpp"
#include "cmot/synth/convert.hpp"

namespace cmot::synth {

using Color = std::array<float, 3>;

struct TargetSpec {
  double w = 24.0;
  double h = 24.0;
  Color color_a{0.9f, 0.2f, 0.1f};
  Color color_b{0.1f, 0.3f, 0.9f};
  double period = 6.0;  // texture period in pixels
  int pattern = 0;      // 0 checker, 1 horizontal stripes, 2 vertical stripes, 3 rings
};

struct MotionSpec {
  double x0 = 40.0;  // initial top-left
  double y0 = 40.0;
  double vx = 1.0;  // pixels per frame
  double vy = 0.5;
  double noise = 0.2;  // sigma of per-frame velocity perturbation
  double scale_amplitude = 0.0;
  double scale_period = 80.0;
};

struct BackgroundSpec {
  Color base{0.45f, 0.5f, 0.4f};
  double clutter = 0.25;  // amplitude of the sinusoidal structure
  std::size_t rectangles = 6;
};

struct ToySequenceConfig {
  std::string id = "toy";
  std::size_t length = 100;
  int image_size = 128;
  TargetSpec target;
  MotionSpec motion;
  BackgroundSpec background;
  Modality start = Modality::RGB;
  std::vector<std::size_t> switch_schedule;  // frames where the modality flips
  std::vector<std::size_t> ma_frames;        // frames rendered with +0.5 intensity
  std::uint64_t seed = 0;

  void validate() const {
    if (length == 0) throw ConfigError("toy sequence '" + id + "' has length 0");
    if (image_size < 16) throw ConfigError("toy image size must be at least 16");
    if (!(target.w >= 4 && target.h >= 4 && target.w < image_size && target.h < image_size))
      throw ConfigError("toy target size must lie in [4, image size)");
    for (std::size_t i = 0; i < switch_schedule.size(); ++i) {
      if (switch_schedule[i] < 1 || switch_schedule[i] >= length)
        throw ConfigError("switch index " + std::to_string(switch_schedule[i]) + " outside [1, length)");
      if (i > 0 && switch_schedule[i] <= switch_schedule[i - 1])
        throw ConfigError("switch indices must be strictly increasing");
    }
    for (auto f : ma_frames) {
      if (f >= length) throw ConfigError("modality-adaptation frame outside the sequence");
      if (switch_schedule.empty() || f < switch_schedule.front())
        throw ConfigError("modality-adaptation frames must follow a switch");
    }
  }
};

namespace detail {

struct Scene {
  int size = 0;
  std::vector<float> background;  // HxWx3
};

inline Scene make_background(const ToySequenceConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "background"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = cfg.image_size;
  Scene s{n, std::vector<float>(static_cast<std::size_t>(n) * n * 3)};
  struct Wave {
    double fx, fy, phase;
    Color amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) {
    Wave w{(0.5 + 3.0 * u(rng)) * 2 * M_PI / n, (0.5 + 3.0 * u(rng)) * 2 * M_PI / n, 2 * M_PI * u(rng), {}};
    for (auto& a : w.amp) a = static_cast<float>(cfg.background.clutter * (u(rng) - 0.5));
    waves.push_back(w);
  }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = cfg.background.base[c];
        for (const auto& w : waves) v += w.amp[c] * std::sin(w.fx * x + w.fy * y + w.phase);
        s.background[(static_cast<std::size_t>(y) * n + x) * 3 + c] = static_cast<float>(v);
      }
  for (std::size_t r = 0; r < cfg.background.rectangles; ++r) {
    const int rw = 6 + static_cast<int>(u(rng) * n / 5), rh = 6 + static_cast<int>(u(rng) * n / 5);
    const int rx = static_cast<int>(u(rng) * (n - rw)), ry = static_cast<int>(u(rng) * (n - rh));
    Color col{static_cast<float>(u(rng)), static_cast<float>(u(rng)), static_cast<float>(u(rng))};
    for (int y = ry; y < ry + rh; ++y)
      for (int x = rx; x < rx + rw; ++x)
        for (int c = 0; c < 3; ++c)
          s.background[(static_cast<std::size_t>(y) * n + x) * 3 + c] =
              0.5f * s.background[(static_cast<std::size_t>(y) * n + x) * 3 + c] + 0.5f * col[c];
  }
  return s;
}

inline bool texture_a(const TargetSpec& t, double u, double v) {
  const double p = t.period;
  switch (t.pattern) {
    case 1: return static_cast<long>(std::floor(v / p)) % 2 == 0;
    case 2: return static_cast<long>(std::floor(u / p)) % 2 == 0;
    case 3: return static_cast<long>(std::floor(std::hypot(u, v) / p)) % 2 == 0;
    default: return (static_cast<long>(std::floor(u / p)) + static_cast<long>(std::floor(v / p))) % 2 == 0;
  }
}

/// Colour rendering of the scene with the target at `box`.
inline std::vector<float> render_rgb(const Scene& s, const TargetSpec& t, const BoundingBox& box) {
  std::vector<float> img = s.background;
  const int n = s.size;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x))),
            x1 = std::min(n - 1, static_cast<int>(std::ceil(box.x + box.w)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y))),
            y1 = std::min(n - 1, static_cast<int>(std::ceil(box.y + box.h)));
  const double sx = t.w / box.w, sy = t.h / box.h;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      if (px < box.x || px >= box.x + box.w || py < box.y || py >= box.y + box.h) continue;
      const double u = (px - box.cx()) * sx, v = (py - box.cy()) * sy;
      const Color& col = texture_a(t, u + 1000.0, v + 1000.0) ? t.color_a : t.color_b;
      for (int c = 0; c < 3; ++c) img[(static_cast<std::size_t>(y) * n + x) * 3 + c] = col[c];
    }
  return img;
}

/// Luminance collapse, gamma 0.6 remap, additive Gaussian noise (sigma 0.02).
template <typename RngT>
std::vector<float> to_nir(const std::vector<float>& rgb, RngT& rng) {
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<float> out(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    const double lum = std::clamp(0.299 * rgb[i] + 0.587 * rgb[i + 1] + 0.114 * rgb[i + 2], 0.0, 1.0);
    const auto v = static_cast<float>(std::pow(lum, 0.6) + noise(rng));
    out[i] = out[i + 1] = out[i + 2] = v;
  }
  return out;
}

inline std::shared_ptr<const Image> to_image(const std::vector<float>& px, int n, float boost) {
  auto img = std::make_shared<Image>(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c)
        img->set(y, x, c, px[(static_cast<std::size_t>(y) * n + x) * 3 + c] + boost);
  return img;
}

/// Target boxes over time: constant-velocity motion with seeded velocity
/// noise, reflected at the image borders, optional sinusoidal scale change.
inline std::vector<BoundingBox> trajectory(const ToySequenceConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "motion"));
  std::normal_distribution<double> n01(0.0, 1.0);
  const double n = cfg.image_size;
  const auto& m = cfg.motion;
  double cx = m.x0 + 0.5 * cfg.target.w, cy = m.y0 + 0.5 * cfg.target.h, vx = m.vx, vy = m.vy;
  const double speed0 = std::hypot(m.vx, m.vy);
  std::vector<BoundingBox> out;
  for (std::size_t t = 0; t < cfg.length; ++t) {
    const double s =
        1.0 + m.scale_amplitude * std::sin(2 * M_PI * static_cast<double>(t) / m.scale_period);
    const double w = cfg.target.w * s, h = cfg.target.h * s;
    // Reflect the centre so the whole box stays inside the image.
    auto reflect = [](double& c, double& v, double half, double lim) {
      const double lo = half, hi = lim - half;
      if (c < lo) {
        c = 2 * lo - c;
        v = std::abs(v);
      }
      if (c > hi) {
        c = 2 * hi - c;
        v = -std::abs(v);
      }
      c = std::clamp(c, lo, hi);
    };
    reflect(cx, vx, 0.5 * w, n);
    reflect(cy, vy, 0.5 * h, n);
    out.push_back(BoundingBox::from_center(cx, cy, w, h));
    // Speed reverts towards the configured one; direction wanders freely.
    vx += m.noise * n01(rng);
    vy += m.noise * n01(rng);
    const double speed = std::hypot(vx, vy);
    if (speed > 1e-9) {
      const double target = speed + 0.05 * (speed0 - speed);
      vx *= target / speed;
      vy *= target / speed;
    }
    cx += vx;
    cy += vy;
  }
  return out;
}

inline std::set<AttributeTag> derive_attributes(const ToySequenceConfig& cfg) {
  std::set<AttributeTag> a;
  if (!cfg.ma_frames.empty()) a.insert(AttributeTag::MA);
  if (cfg.motion.scale_amplitude >= 0.1) a.insert(AttributeTag::SV);
  if (std::hypot(cfg.motion.vx, cfg.motion.vy) >= 2.0) a.insert(AttributeTag::FM);
  if (cfg.background.clutter >= 0.3) a.insert(AttributeTag::BC);
  if (std::min(cfg.target.w, cfg.target.h) <= 0.12 * cfg.image_size) a.insert(AttributeTag::SO);
  return a;
}

}  // namespace detail

/// Renders a moving textured target over a structured background. Geometry
/// is shared across modalities; only appearance follows the schedule.
inline Sequence generate_toy_sequence(const ToySequenceConfig& cfg) {
  cfg.validate();
  const auto scene = detail::make_background(cfg);
  const auto boxes = detail::trajectory(cfg);
  Rng noise(derive_seed(cfg.seed, "nir-noise"));
  Sequence seq;
  seq.id = cfg.id;
  seq.attributes = detail::derive_attributes(cfg);
  Modality m = cfg.start;
  std::size_t next = 0;
  for (std::size_t t = 0; t < cfg.length; ++t) {
    if (next < cfg.switch_schedule.size() && cfg.switch_schedule[next] == t) {
      m = other(m);
      ++next;
    }
    auto px = detail::render_rgb(scene, cfg.target, boxes[t]);
    if (m == Modality::NIR) px = detail::to_nir(px, noise);
    const bool ma = std::find(cfg.ma_frames.begin(), cfg.ma_frames.end(), t) != cfg.ma_frames.end();
    seq.frames.push_back({detail::to_image(px, cfg.image_size, ma ? 0.5f : 0.0f), m, boxes[t], true});
  }
  return seq;
}

/// Both renderings of every frame plus seeded IV/TC challenge runs, for the
/// dual-stream conversion path. `challenge_runs` runs of 2..10 frames.
inline DualModalitySequence generate_toy_dual(const ToySequenceConfig& cfg, std::size_t challenge_runs) {
  ToySequenceConfig c = cfg;
  c.switch_schedule.clear();
  c.ma_frames.clear();
  c.validate();
  const auto scene = detail::make_background(c);
  const auto boxes = detail::trajectory(c);
  Rng noise(derive_seed(c.seed, "nir-noise"));
  DualModalitySequence d;
  d.id = c.id;
  d.gt = boxes;
  d.attributes = detail::derive_attributes(c);
  for (std::size_t t = 0; t < c.length; ++t) {
    const auto rgb = detail::render_rgb(scene, c.target, boxes[t]);
    d.frames_a.push_back(detail::to_image(rgb, c.image_size, 0.0f));
    d.frames_b.push_back(detail::to_image(detail::to_nir(rgb, noise), c.image_size, 0.0f));
  }
  d.iv.assign(c.length, false);
  d.tc.assign(c.length, false);
  Rng rng(derive_seed(c.seed, "challenges"));
  std::uniform_int_distribution<std::size_t> start(0, c.length - 1), len(2, 10);
  std::bernoulli_distribution is_iv(0.5);
  for (std::size_t r = 0; r < challenge_runs; ++r) {
    const std::size_t b = start(rng), e = std::min(c.length, b + len(rng));
    auto& flags = is_iv(rng) ? d.iv : d.tc;
    for (std::size_t i = b; i < e; ++i) flags[i] = true;
  }
  return d;
}

struct BenchmarkOptions {
  int image_size = 128;
  std::size_t min_length = 80;
  std::size_t max_length = 300;
  /// Probabilities of 1, 2 and 3 switches.
  std::array<double, 3> switch_weights{0.6, 0.25, 0.15};
  double ma_fraction = 0.15;
};

/// Seeded configuration draw for one benchmark sequence.
inline ToySequenceConfig sample_toy_config(const std::string& id, std::uint64_t seed,
                                           const BenchmarkOptions& opt = {}) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };
  ToySequenceConfig c;
  c.id = id;
  c.seed = seed;
  c.image_size = opt.image_size;
  const double n = opt.image_size;
  c.length = opt.min_length +
             static_cast<std::size_t>(u(rng) * static_cast<double>(opt.max_length - opt.min_length + 1));
  c.length = std::min(c.length, opt.max_length);
  c.target.w = std::round(uni(0.12, 0.25) * n);
  c.target.h = std::round(c.target.w * uni(0.7, 1.4));
  c.target.h = std::clamp(c.target.h, 8.0, 0.35 * n);
  for (auto& v : c.target.color_a) v = static_cast<float>(uni(0.0, 1.0));
  for (auto& v : c.target.color_b) v = static_cast<float>(uni(0.0, 1.0));
  c.target.period = uni(3.0, 8.0);
  c.target.pattern = static_cast<int>(u(rng) * 4) % 4;
  c.motion.x0 = uni(0.1, 0.9) * (n - c.target.w);
  c.motion.y0 = uni(0.1, 0.9) * (n - c.target.h);
  const double speed = uni(0.3, 2.5), angle = uni(0.0, 2 * M_PI);
  c.motion.vx = speed * std::cos(angle);
  c.motion.vy = speed * std::sin(angle);
  c.motion.noise = uni(0.05, 0.25);
  c.motion.scale_amplitude = u(rng) < 0.3 ? uni(0.1, 0.25) : 0.0;
  c.motion.scale_period = uni(60.0, 150.0);
  for (auto& v : c.background.base) v = static_cast<float>(uni(0.25, 0.75));
  c.background.clutter = uni(0.1, 0.4);
  c.background.rectangles = 3 + static_cast<std::size_t>(u(rng) * 6);
  c.start = u(rng) < 0.5 ? Modality::RGB : Modality::NIR;

  const double r = u(rng) * (opt.switch_weights[0] + opt.switch_weights[1] + opt.switch_weights[2]);
  const std::size_t switches =
      r < opt.switch_weights[0] ? 1 : (r < opt.switch_weights[0] + opt.switch_weights[1] ? 2 : 3);
  // Evenly spaced slots with jitter keep switches apart and inside (1, length).
  const double slot = static_cast<double>(c.length) / static_cast<double>(switches + 1);
  for (std::size_t k = 1; k <= switches; ++k) {
    const double centre = slot * static_cast<double>(k) + uni(-0.3, 0.3) * slot;
    c.switch_schedule.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(centre), 1, c.length - 1));
  }
  std::sort(c.switch_schedule.begin(), c.switch_schedule.end());
  c.switch_schedule.erase(std::unique(c.switch_schedule.begin(), c.switch_schedule.end()),
                          c.switch_schedule.end());
  if (u(rng) < opt.ma_fraction) {
    const std::size_t s = c.switch_schedule.front();
    const std::size_t k = 3 + static_cast<std::size_t>(u(rng) * 6);
    for (std::size_t i = s; i < std::min(c.length, s + k); ++i) c.ma_frames.push_back(i);
  }
  return c;
}

struct ToyBenchmark {
  std::vector<Sequence> train;
  std::vector<Sequence> test;
  std::vector<ToySequenceConfig> train_configs;
  std::vector<ToySequenceConfig> test_configs;
};

inline std::string benchmark_id(const std::string& split, std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return "toy_" + split + "_" + buf;
}

/// `n_train` + `n_test` sequences with ids toy_train_000..., toy_test_000...;
/// every sequence has 1 to 3 switches. Deterministic in `master_seed`.
inline ToyBenchmark generate_toy_benchmark(std::size_t n_train, std::size_t n_test,
                                           std::uint64_t master_seed,
                                           const BenchmarkOptions& opt = {}) {
  if (n_train == 0 || n_test == 0) throw ConfigError("benchmark needs at least one sequence per split");
  ToyBenchmark b;
  for (std::size_t i = 0; i < n_train; ++i)
    b.train_configs.push_back(
        sample_toy_config(benchmark_id("train", i), derive_seed(master_seed, "toy-train", i), opt));
  for (std::size_t i = 0; i < n_test; ++i)
    b.test_configs.push_back(
        sample_toy_config(benchmark_id("test", i), derive_seed(master_seed, "toy-test", i), opt));
  for (const auto& c : b.train_configs) b.train.push_back(generate_toy_sequence(c));
  for (const auto& c : b.test_configs) b.test.push_back(generate_toy_sequence(c));
  return b;
}

}  // namespace cmot::synth
