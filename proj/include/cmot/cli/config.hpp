#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmot/data/io.hpp"
#include "cmot/eval/evaluate.hpp"
#include "cmot/eval/report.hpp"
#include "cmot/synth/manifest.hpp"
#include "cmot/tracker/tracker.hpp"
#include "cmot/training/stages.hpp"

namespace cmot::tracker {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Spread, xy, scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SampleSpec, positives, negatives, pos_iou, neg_iou, pos_spread, neg_spread,
                                   uniform_negatives, max_attempts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ConvLayerSpec, out_channels, kernel, stride, padding, pool)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BackboneSpec, name, in_channels, patch_size, layers, insertion_points)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NetConfig, backbone, use_marmot, reduction, width_floor, head_hidden)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrackerConfig, candidates, top_k, threshold, spread, failure_growth,
                                   max_spread_xy, padding, init_samples, init_iterations, init_lr, update_samples,
                                   update_iterations, update_lr, batch_pos, batch_neg, long_interval,
                                   short_capacity, long_capacity, regression_samples, regression_iou, ridge_lambda,
                                   use_regressor, max_scale_step)
}  // namespace cmot::tracker

namespace cmot::training {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainingConfig, base_lr, stage1_iterations, stage2_lr, stage2_iterations,
                                   stage3_iterations, one_stage_iterations, frames_per_batch, samples, padding,
                                   momentum, weight_decay)
}  // namespace cmot::training

namespace cmot::eval {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalConfig, pr_threshold, npr_threshold, sr_threshold, distance_max, norm_max,
                                   overlap_steps)
}  // namespace cmot::eval

namespace cmot::cli {

namespace fs = std::filesystem;

inline constexpr const char* kWorkspaceEnv = "CMOT_WORKSPACE";
inline constexpr const char* kResolvedConfig = "resolved_config.json";

struct SynthSettings {
  std::size_t n_train = 40;
  std::size_t n_test = 20;
  /// Dual-stream sequences pushed through the converter into `converted/`.
  std::size_t n_dual = 0;
  std::size_t dual_challenge_runs = 3;
  synth::BenchmarkOptions options;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SynthSettings, n_train, n_test, n_dual, dual_challenge_runs, options)

/// Locations relative to the workspace root.
struct Paths {
  std::string benchmark = "benchmark";
  std::string run = "runs/default";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Paths, benchmark, run)

/// Every setting of every command. The workspace root is not part of the
/// file: it comes from the command line or the environment. `seed` is the
/// master seed; training derives its own from it.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string stages = "three";  // "three" or "one"
  std::size_t jobs = 1;
  Paths paths;
  SynthSettings synth;
  tracker::NetConfig net;
  training::TrainingConfig training;
  tracker::TrackerConfig tracker;
  eval::EvalConfig eval;

  training::Schedule schedule() const {
    if (stages == "three") return training::Schedule::Three;
    if (stages == "one") return training::Schedule::One;
    throw ConfigError("stages must be 'three' or 'one', got '" + stages + "'");
  }

  void validate() const {
    schedule();
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    if (synth.n_train == 0 || synth.n_test == 0) throw ConfigError("benchmark needs train and test sequences");
    net.backbone.validate();
    training.validate();
    eval.validate();
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunConfig, seed, stages, jobs, paths, synth, net, training, tracker, eval)

namespace detail {

/// Every object key of `patch` must exist in `base`, recursively.
inline void require_known_keys(const nlohmann::json& base, const nlohmann::json& patch, const std::string& at) {
  if (!patch.is_object()) return;
  if (!base.is_object()) throw ConfigError("'" + at + "' is not a section");
  for (const auto& [k, v] : patch.items()) {
    const std::string key = at.empty() ? k : at + "." + k;
    if (!base.contains(k)) throw ConfigError("unknown config key '" + key + "'");
    require_known_keys(base.at(k), v, key);
  }
}

/// Override values parse as JSON when they can, and as plain strings otherwise.
inline nlohmann::json parse_value(const std::string& text) {
  auto v = nlohmann::json::parse(text, nullptr, false);
  return v.is_discarded() ? nlohmann::json(text) : v;
}

}  // namespace detail

/// Applies `dotted.key=value` overrides on top of `j`.
inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    std::string pointer;
    for (const auto part : split(key, '.')) pointer += "/" + std::string(part);
    try {
      const nlohmann::json::json_pointer ptr(pointer);
      if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
      j[ptr] = detail::parse_value(o.substr(eq + 1));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad override '" + o + "': " + e.what());
    }
  }
}

/// Defaults, merged with the optional config file, then overrides; validated.
inline RunConfig resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  nlohmann::json j = RunConfig{};
  if (file) {
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(eval::read_text(*file));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + file->string() + " is not valid JSON: " + e.what());
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    if (!patch.is_object()) throw ConfigError("config file " + file->string() + " must hold an object");
    detail::require_known_keys(j, patch, "");
    j.merge_patch(patch);
  }
  apply_overrides(j, overrides);
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

/// Explicit path, else the environment variable, else the current directory.
inline fs::path resolve_workspace(const std::optional<fs::path>& explicit_root) {
  if (explicit_root) return *explicit_root;
  if (const char* env = std::getenv(kWorkspaceEnv); env && *env) return env;
  return fs::current_path();
}

inline void write_resolved(const RunConfig& c, const fs::path& dir) {
  fs::create_directories(dir);
  eval::write_text(dir / kResolvedConfig, nlohmann::json(c).dump(2) + "\n");
}

}  // namespace cmot::cli
