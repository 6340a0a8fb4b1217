#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "cmot/cli/config.hpp"
#include "cmot/data/io.hpp"
#include "cmot/synth/convert.hpp"

namespace cmot::cli {

/// Exit codes: success, bad configuration, bad or missing data, numeric failure.
enum class ExitCode : int { Ok = 0, Config = 2, Data = 3, Numeric = 4 };

/// Maps the library's exception hierarchy to an exit code.
inline ExitCode exit_code_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::Config;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::Numeric;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return ExitCode::Data;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ExitCode::Data;
  return ExitCode::Config;
}

/// Layout under the workspace:
///   <benchmark>/{train,test,converted}/<id>/, manifest.json
///   <run>/train/<name>/{stage1..3.ckpt | one.ckpt, train_log.json}
///   <run>/track/<name>/{<id>.txt, <id>.log.csv}
///   <run>/eval/{report.json, *.png, *.csv}
/// Every command writes resolved_config.json next to its outputs.
struct Workspace {
  fs::path root;
  RunConfig cfg;

  fs::path benchmark() const { return root / cfg.paths.benchmark; }
  fs::path run() const { return root / cfg.paths.run; }
  fs::path train_dir(const std::string& name) const { return run() / "train" / name; }
  fs::path track_dir(const std::string& name) const { return run() / "track" / name; }
  fs::path eval_dir() const { return run() / "eval"; }
};

using Log = std::function<void(const std::string&)>;

/// Default run name: which network and which schedule.
inline std::string variant_name(const RunConfig& c) {
  return std::string(c.net.use_marmot ? "marmot" : "baseline") + "-" + c.stages;
}

/// Every sequence under `dir`, in id order.
inline std::vector<Sequence> load_split(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw StructuralError("benchmark split '" + dir.string() + "' is missing; run synth first");
  std::vector<fs::path> roots;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) roots.push_back(e.path());
  std::sort(roots.begin(), roots.end());
  if (roots.empty()) throw InsufficientDataError("benchmark split '" + dir.string() + "' holds no sequences");
  std::vector<Sequence> out;
  for (const auto& r : roots) out.push_back(load_sequence(r));
  return out;
}

namespace detail {

inline void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output '" + dir.string() + "' exists; pass --force to regenerate it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

inline tracker::TrackNet initial_network(const RunConfig& c) {
  tracker::TrackNet net(c.net);
  Rng rng(derive_seed(c.seed, "init"));
  net.init(rng);
  return net;
}

inline std::string frame_log(const tracker::TrackResult& r) {
  std::ostringstream os;
  os << "frame,x,y,w,h,score,success,update\n";
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    os << i << ',' << format_double(f.box.x) << ',' << format_double(f.box.y) << ',' << format_double(f.box.w)
       << ',' << format_double(f.box.h) << ',' << format_double(f.score) << ',' << (f.success ? 1 : 0) << ','
       << tracker::to_string(f.update) << '\n';
  }
  return os.str();
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& work) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          work(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

struct SynthSummary {
  fs::path dir;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t converted = 0;
  std::size_t discarded = 0;
};

/// Writes the toy benchmark, the converted dual-stream sequences and a manifest
/// that regenerates all of it.
inline SynthSummary cmd_synth(const Workspace& ws, bool force, const Log& log = {}) {
  const auto& c = ws.cfg;
  SynthSummary s{ws.benchmark()};
  detail::prepare_output(s.dir, force);
  const auto bench = synth::generate_toy_benchmark(c.synth.n_train, c.synth.n_test, c.seed, c.synth.options);
  for (const auto& q : bench.train) save_sequence(q, s.dir / "train" / q.id);
  for (const auto& q : bench.test) save_sequence(q, s.dir / "test" / q.id);
  s.train = bench.train.size();
  s.test = bench.test.size();

  synth::BenchmarkManifest m{c.seed, c.synth.options, bench.train_configs, bench.test_configs, {}};
  for (std::size_t i = 0; i < c.synth.n_dual; ++i) {
    const auto dual = synth::make_dual(c.seed, i, c.synth.dual_challenge_runs, c.synth.options);
    const std::uint64_t seed = derive_seed(c.seed, "convert");
    const auto r = synth::convert_dual(dual, seed);
    m.converted.push_back({dual.id, seed, c.synth.dual_challenge_runs, r.plan.switches, r.discarded(),
                           r.plan.reason, r.plan.segment});
    if (r.discarded()) {
      ++s.discarded;
      continue;
    }
    save_sequence(*r.sequence, s.dir / "converted" / dual.id);
    ++s.converted;
  }
  eval::write_text(s.dir / "manifest.json", synth::manifest_to_json(m).dump(2) + "\n");
  write_resolved(c, s.dir);
  if (log)
    log("synth: " + std::to_string(s.train) + " train, " + std::to_string(s.test) + " test, " +
        std::to_string(s.converted) + " converted, " + std::to_string(s.discarded) + " discarded -> " +
        s.dir.string());
  return s;
}

struct TrainSummary {
  fs::path dir;
  training::PipelineResult result;
};

/// Trains from the initial weights over the benchmark's training split.
inline TrainSummary cmd_train(const Workspace& ws, const std::string& name, bool force, const Log& log = {}) {
  const auto& c = ws.cfg;
  TrainSummary s{ws.train_dir(name), {}};
  const auto data = load_split(ws.benchmark() / "train");
  detail::prepare_output(s.dir, force);
  write_resolved(c, s.dir);
  auto tc = c.training;
  tc.seed = derive_seed(c.seed, "train");
  auto net = detail::initial_network(c);
  training::ProgressFn progress;
  if (log)
    progress = [&](std::size_t it, double loss) {
      if (it % 100 == 0) log("train: iteration " + std::to_string(it) + " loss " + eval::fixed6(loss));
    };
  s.result = training::train_pipeline(net, data, tc, c.schedule(), s.dir, progress);
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t i = 0; i < s.result.stages.size(); ++i) {
    const auto& st = s.result.stages[i];
    stages.push_back({{"stage", st.config.stage},
                      {"iterations", st.losses.size()},
                      {"initial_loss", st.initial_loss()},
                      {"final_loss", st.final_loss()},
                      {"checkpoint", s.result.checkpoints.at(i).filename().string()},
                      {"losses", st.losses}});
    if (log)
      log("train: stage " + st.config.stage + " loss " + eval::fixed6(st.initial_loss()) + " -> " +
          eval::fixed6(st.final_loss()));
  }
  eval::write_text(s.dir / "train_log.json",
                   nlohmann::json{{"name", name}, {"schedule", c.stages}, {"stages", stages}}.dump(2) + "\n");
  return s;
}

/// The checkpoint a finished training run ends with.
inline fs::path final_checkpoint(const fs::path& train_dir) {
  for (const char* f : {"stage3.ckpt", "one.ckpt"})
    if (fs::exists(train_dir / f)) return train_dir / f;
  throw StructuralError("no final checkpoint in '" + train_dir.string() + "'; run train first");
}

struct TrackSummary {
  fs::path dir;
  std::size_t sequences = 0;
  std::size_t frames = 0;
};

/// Tracks every test sequence with `checkpoint` (default: the final checkpoint
/// of the run named `name`). Without the block, a checkpoint that carries
/// block entries still loads; the entries are ignored.
inline TrackSummary cmd_track(const Workspace& ws, const std::string& name,
                              const std::optional<fs::path>& checkpoint, bool force, const Log& log = {}) {
  const auto& c = ws.cfg;
  TrackSummary s{ws.track_dir(name)};
  const auto data = load_split(ws.benchmark() / "test");
  const fs::path ckpt = checkpoint ? *checkpoint : final_checkpoint(ws.train_dir(name));
  tracker::TrackNet net(c.net);
  nn::restore(net, nn::load_checkpoint(ckpt), !c.net.use_marmot);
  detail::prepare_output(s.dir, force);
  write_resolved(c, s.dir);
  std::vector<tracker::TrackResult> results(data.size());
  const std::uint64_t seed = derive_seed(c.seed, "track");
  detail::parallel_for(data.size(), c.jobs,
                       [&](std::size_t i) { results[i] = tracker::track_sequence(net, data[i], c.tracker, seed); });
  for (std::size_t i = 0; i < data.size(); ++i) {
    write_results(s.dir / (data[i].id + ".txt"), results[i].boxes);
    eval::write_text(s.dir / (data[i].id + ".log.csv"), detail::frame_log(results[i]));
    s.frames += results[i].boxes.size();
  }
  s.sequences = data.size();
  if (log)
    log("track: " + name + " " + std::to_string(s.sequences) + " sequences, " + std::to_string(s.frames) +
        " frames -> " + s.dir.string());
  return s;
}

/// Results of one tracker over `data`, read from `dir`; sequences without a
/// results file are left out so that `evaluate` names the first one missing.
inline std::map<std::string, std::vector<BoundingBox>> read_tracker_results(const fs::path& dir,
                                                                             const std::vector<Sequence>& data) {
  std::map<std::string, std::vector<BoundingBox>> out;
  for (const auto& q : data)
    if (fs::exists(dir / (q.id + ".txt"))) out[q.id] = read_results(dir / (q.id + ".txt"));
  return out;
}

/// Evaluates the named trackers (default: every tracked run) on the test split.
inline std::vector<eval::EvalReport> cmd_eval(const Workspace& ws, std::vector<std::string> names,
                                              const Log& log = {}) {
  const auto& c = ws.cfg;
  const auto data = load_split(ws.benchmark() / "test");
  if (names.empty() && fs::is_directory(ws.run() / "track"))
    for (const auto& e : fs::directory_iterator(ws.run() / "track"))
      if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw StructuralError("no tracking results under '" + (ws.run() / "track").string() + "'");
  std::vector<eval::EvalReport> reports;
  for (const auto& n : names) {
    if (!fs::is_directory(ws.track_dir(n))) throw StructuralError("no tracking results for '" + n + "'");
    reports.push_back(eval::evaluate(read_tracker_results(ws.track_dir(n), data), data, c.eval, n));
  }
  eval::write_report(ws.eval_dir(), reports);
  write_resolved(c, ws.eval_dir());
  if (log)
    for (const auto& r : eval::rank_by_sr1(reports))
      log("eval: " + r.tracker + " PR " + eval::fixed3(r.overall.pr) + " NPR " + eval::fixed3(r.overall.npr) +
          " SR-I " + eval::fixed3(r.overall.sr1) + " SR-II " + eval::fixed3(r.overall.sr2));
  return reports;
}

/// Re-renders plots and tables from saved report files into `out`.
inline std::vector<eval::EvalReport> cmd_report(const std::vector<fs::path>& inputs, const fs::path& out,
                                                const Log& log = {}) {
  if (inputs.empty()) throw ConfigError("report needs at least one input report");
  std::vector<eval::EvalReport> reports;
  for (const auto& p : inputs)
    for (auto& r : eval::load_reports(p)) reports.push_back(std::move(r));
  eval::write_report(out, reports);
  if (log) log("report: " + std::to_string(reports.size()) + " trackers -> " + out.string());
  return reports;
}

}  // namespace cmot::cli
