#pragma once

#include <nlohmann/json.hpp>

#include "cmot/synth/toy.hpp"

namespace cmot::synth {

inline constexpr const char* kBenchmarkSchema = "cmot.benchmark_manifest";
inline constexpr int kBenchmarkVersion = 1;

inline void to_json(nlohmann::json& j, const ToySequenceConfig& c) {
  j = {{"id", c.id},
       {"length", c.length},
       {"image_size", c.image_size},
       {"seed", c.seed},
       {"start", std::string(to_string(c.start))},
       {"switch_schedule", c.switch_schedule},
       {"ma_frames", c.ma_frames},
       {"target",
        {{"w", c.target.w},
         {"h", c.target.h},
         {"color_a", c.target.color_a},
         {"color_b", c.target.color_b},
         {"period", c.target.period},
         {"pattern", c.target.pattern}}},
       {"motion",
        {{"x0", c.motion.x0},
         {"y0", c.motion.y0},
         {"vx", c.motion.vx},
         {"vy", c.motion.vy},
         {"noise", c.motion.noise},
         {"scale_amplitude", c.motion.scale_amplitude},
         {"scale_period", c.motion.scale_period}}},
       {"background",
        {{"base", c.background.base}, {"clutter", c.background.clutter}, {"rectangles", c.background.rectangles}}}};
}

inline void from_json(const nlohmann::json& j, ToySequenceConfig& c) {
  j.at("id").get_to(c.id);
  j.at("length").get_to(c.length);
  j.at("image_size").get_to(c.image_size);
  j.at("seed").get_to(c.seed);
  c.start = parse_modality(j.at("start").get<std::string>());
  j.at("switch_schedule").get_to(c.switch_schedule);
  j.at("ma_frames").get_to(c.ma_frames);
  const auto& t = j.at("target");
  t.at("w").get_to(c.target.w);
  t.at("h").get_to(c.target.h);
  t.at("color_a").get_to(c.target.color_a);
  t.at("color_b").get_to(c.target.color_b);
  t.at("period").get_to(c.target.period);
  t.at("pattern").get_to(c.target.pattern);
  const auto& m = j.at("motion");
  m.at("x0").get_to(c.motion.x0);
  m.at("y0").get_to(c.motion.y0);
  m.at("vx").get_to(c.motion.vx);
  m.at("vy").get_to(c.motion.vy);
  m.at("noise").get_to(c.motion.noise);
  m.at("scale_amplitude").get_to(c.motion.scale_amplitude);
  m.at("scale_period").get_to(c.motion.scale_period);
  const auto& b = j.at("background");
  b.at("base").get_to(c.background.base);
  b.at("clutter").get_to(c.background.clutter);
  b.at("rectangles").get_to(c.background.rectangles);
}

inline void to_json(nlohmann::json& j, const BenchmarkOptions& o) {
  j = {{"image_size", o.image_size},
       {"min_length", o.min_length},
       {"max_length", o.max_length},
       {"switch_weights", o.switch_weights},
       {"ma_fraction", o.ma_fraction}};
}

inline void from_json(const nlohmann::json& j, BenchmarkOptions& o) {
  j.at("image_size").get_to(o.image_size);
  j.at("min_length").get_to(o.min_length);
  j.at("max_length").get_to(o.max_length);
  j.at("switch_weights").get_to(o.switch_weights);
  j.at("ma_fraction").get_to(o.ma_fraction);
}

/// One converted dual-stream sequence: its plan summary and whether it was kept.
struct ConversionRecord {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t challenge_runs = 0;
  std::size_t switches = 0;
  bool discarded = false;
  std::string reason;
  std::optional<std::pair<std::size_t, std::size_t>> segment;
};

inline void to_json(nlohmann::json& j, const ConversionRecord& r) {
  j = {{"id", r.id},
       {"seed", r.seed},
       {"challenge_runs", r.challenge_runs},
       {"switches", r.switches},
       {"discarded", r.discarded},
       {"reason", r.reason},
       {"segment", r.segment ? nlohmann::json::array({r.segment->first, r.segment->second}) : nlohmann::json()}};
}

inline void from_json(const nlohmann::json& j, ConversionRecord& r) {
  j.at("id").get_to(r.id);
  j.at("seed").get_to(r.seed);
  j.at("challenge_runs").get_to(r.challenge_runs);
  j.at("switches").get_to(r.switches);
  j.at("discarded").get_to(r.discarded);
  j.at("reason").get_to(r.reason);
  r.segment.reset();
  if (!j.at("segment").is_null()) r.segment = {j.at("segment").at(0).get<std::size_t>(), j.at("segment").at(1).get<std::size_t>()};
}

/// Everything needed to regenerate a benchmark bit-exactly.
struct BenchmarkManifest {
  std::uint64_t master_seed = 0;
  BenchmarkOptions options;
  std::vector<ToySequenceConfig> train;
  std::vector<ToySequenceConfig> test;
  std::vector<ConversionRecord> converted;
};

inline nlohmann::json manifest_to_json(const BenchmarkManifest& m) {
  return {{"schema", kBenchmarkSchema}, {"version", kBenchmarkVersion}, {"master_seed", m.master_seed},
          {"options", m.options},       {"train", m.train},             {"test", m.test},
          {"converted", m.converted}};
}

inline BenchmarkManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kBenchmarkSchema)
      throw ParseError("not a benchmark manifest: schema '" + j.at("schema").get<std::string>() + "'");
    if (j.at("version").get<int>() != kBenchmarkVersion)
      throw ParseError("unsupported benchmark manifest version");
    BenchmarkManifest m;
    j.at("master_seed").get_to(m.master_seed);
    j.at("options").get_to(m.options);
    j.at("train").get_to(m.train);
    j.at("test").get_to(m.test);
    j.at("converted").get_to(m.converted);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed benchmark manifest: ") + e.what());
  }
}

/// Dual-stream sequence for conversion record `i`: a toy scene rendered in both
/// modalities with `challenge_runs` random IV/TC runs.
inline DualModalitySequence make_dual(std::uint64_t master_seed, std::size_t i, std::size_t challenge_runs,
                                      const BenchmarkOptions& opt) {
  return generate_toy_dual(sample_toy_config(benchmark_id("dual", i), derive_seed(master_seed, "toy-dual", i), opt),
                           challenge_runs);
}

}  // namespace cmot::synth
