#pragma once

// Randomised dual-stream fixtures with cheap constant frames: stream A is
// all-dark, stream B all-bright, so a converted frame reveals its source.

#include <memory>
#include <random>
#include <string>

#include "cmot/synth/convert.hpp"

namespace support {

struct DualFixtureOptions {
  std::size_t min_length = 2;
  std::size_t max_length = 120;
  std::size_t max_runs = 9;
  bool force_iv_first = false;
};

inline cmot::synth::DualModalitySequence random_dual(std::uint64_t seed, const DualFixtureOptions& opt = {}) {
  static const auto dark = std::make_shared<const cmot::Image>(8, 8);
  static const auto bright = [] {
    auto im = std::make_shared<cmot::Image>(8, 8);
    std::fill(im->bytes().begin(), im->bytes().end(), std::uint8_t{255});
    return std::shared_ptr<const cmot::Image>(im);
  }();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(opt.min_length, opt.max_length), runs(0, opt.max_runs);
  const std::size_t n = len(rng);
  cmot::synth::DualModalitySequence d;
  d.id = "fixture_" + std::to_string(seed);
  d.frames_a.assign(n, dark);
  d.frames_b.assign(n, bright);
  d.gt.assign(n, cmot::BoundingBox{1, 1, 4, 4});
  d.iv.assign(n, false);
  d.tc.assign(n, false);
  const std::size_t k = runs(rng);
  std::uniform_int_distribution<std::size_t> start(0, n - 1), run_len(1, 8);
  std::bernoulli_distribution iv(0.5);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t b = start(rng), e = std::min(n, b + run_len(rng));
    auto& flags = iv(rng) ? d.iv : d.tc;
    for (std::size_t i = b; i < e; ++i) flags[i] = true;
  }
  if (opt.force_iv_first) d.iv[0] = true;
  return d;
}

}  // namespace support
