#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"
#include "cmot/data/stats.hpp"
#include "cmot/rng.hpp"

namespace cmot::synth {

/// Co-registered two-stream sequence: `frames_a` is RGB, `frames_b` the
/// second modality; per-frame IV (illumination variation) and TC (thermal
/// crossover) challenge flags.
struct DualModalitySequence {
  std::string id;
  std::vector<std::shared_ptr<const Image>> frames_a;
  std::vector<std::shared_ptr<const Image>> frames_b;
  std::vector<BoundingBox> gt;
  std::vector<bool> iv;
  std::vector<bool> tc;
  std::set<AttributeTag> attributes;

  std::size_t size() const { return gt.size(); }

  void validate() const {
    const std::size_t n = gt.size();
    if (n == 0) throw ValidationError("dual sequence '" + id + "' is empty");
    if (frames_a.size() != n || frames_b.size() != n || iv.size() != n || tc.size() != n)
      throw StructuralError("dual sequence '" + id + "' has streams of unequal length");
    for (const auto& b : gt) b.validate();
  }
};

/// Modality schedule derived from challenge flags alone.
struct ConversionPlan {
  std::vector<Modality> modalities;
  std::vector<std::size_t> onsets;  // challenge onsets at index >= 1 (switch positions)
  std::optional<std::pair<std::size_t, std::size_t>> segment;  // injected [begin, end)
  std::size_t switches = 0;
  bool discarded = false;
  std::string reason;
};

inline constexpr std::size_t kMaxSwitches = 5;

/// First frame of every maximal run of frames flagged IV or TC.
inline std::vector<std::size_t> challenge_onsets(const std::vector<bool>& iv,
                                                 const std::vector<bool>& tc) {
  std::vector<std::size_t> out;
  bool prev = false;
  for (std::size_t i = 0; i < iv.size(); ++i) {
    const bool cur = iv[i] || tc[i];
    if (cur && !prev) out.push_back(i);
    prev = cur;
  }
  return out;
}

/// Starts in RGB unless IV is flagged on the first frame, toggles at each
/// onset after the first frame. More than five switches discards the
/// sequence; none injects one flipped segment covering a uniform fraction in
/// [1/4, 1/2] of the length at a uniform position after the first frame.
inline ConversionPlan plan_conversion(const std::vector<bool>& iv, const std::vector<bool>& tc,
                                      std::uint64_t seed) {
  ConversionPlan p;
  const std::size_t n = iv.size();
  if (tc.size() != n) throw StructuralError("challenge flag lists differ in length");
  if (n == 0) throw ValidationError("cannot convert an empty sequence");
  Modality m = iv[0] ? Modality::NIR : Modality::RGB;
  std::vector<std::size_t> onsets = challenge_onsets(iv, tc);
  for (auto o : onsets)
    if (o >= 1) p.onsets.push_back(o);
  p.modalities.resize(n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < p.onsets.size() && p.onsets[next] == i) {
      m = other(m);
      ++next;
    }
    p.modalities[i] = m;
  }
  p.switches = modality_switch_count(p.modalities);
  if (p.switches > kMaxSwitches) {
    p.discarded = true;
    p.reason = std::to_string(p.switches) + " switches exceed " + std::to_string(kMaxSwitches);
    return p;
  }
  if (p.switches == 0) {
    if (n < 2) {
      p.discarded = true;
      p.reason = "single frame leaves no room for a switch";
      return p;
    }
    Rng rng(derive_seed(seed, "segment"));
    std::uniform_real_distribution<double> frac(0.25, 0.5);
    const auto lo = static_cast<std::size_t>(std::ceil(static_cast<double>(n) / 4.0));
    const std::size_t hi = n / 2;
    // For n >= 2, 1 <= ceil(n/4) <= floor(n/2), so the clamp keeps the fraction in [1/4, 1/2].
    const std::size_t len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(frac(rng) * static_cast<double>(n))), lo, hi);
    std::uniform_int_distribution<std::size_t> start(1, n - len);
    const std::size_t b = start(rng);
    p.segment = {b, b + len};
    for (std::size_t i = b; i < b + len; ++i) p.modalities[i] = other(p.modalities[i]);
    p.switches = modality_switch_count(p.modalities);
  }
  return p;
}

struct ConversionResult {
  ConversionPlan plan;
  std::optional<Sequence> sequence;  // empty when discarded

  bool discarded() const { return !sequence.has_value(); }
};

/// Single-stream cross-modal sequence picking, per frame, the stream the plan selects.
inline ConversionResult convert_dual(const DualModalitySequence& dual, std::uint64_t seed) {
  dual.validate();
  ConversionResult r{plan_conversion(dual.iv, dual.tc, derive_seed(seed, dual.id)), std::nullopt};
  if (r.plan.discarded) return r;
  Sequence s;
  s.id = dual.id;
  s.attributes = dual.attributes;
  for (std::size_t i = 0; i < dual.size(); ++i) {
    const Modality m = r.plan.modalities[i];
    s.frames.push_back({m == Modality::RGB ? dual.frames_a[i] : dual.frames_b[i], m, dual.gt[i], true});
  }
  r.sequence = std::move(s);
  return r;
}

}  // namespace cmot::synth
