#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "cmot/cli/commands.hpp"

using namespace cmot;
using namespace cmot::cli;

namespace {

std::string slurp(const fs::path& p) { return eval::read_text(p); }

/// A workspace small enough to run every command in a few seconds.
Workspace tiny(const std::string& tag, std::vector<std::string> extra = {}) {
  const auto root = fs::temp_directory_path() / ("cmot_cli_" + tag);
  fs::remove_all(root);
  std::vector<std::string> o{"synth.n_train=4",
                             "synth.n_test=2",
                             "synth.options.min_length=12",
                             "synth.options.max_length=16",
                             "synth.options.image_size=48",
                             "training.stage1_iterations=4",
                             "training.stage2_iterations=4",
                             "training.stage3_iterations=4",
                             "tracker.candidates=16",
                             "tracker.init_iterations=2",
                             "tracker.regression_samples=40"};
  o.insert(o.end(), extra.begin(), extra.end());
  return {root, resolve_config(std::nullopt, o)};
}

Workspace with(Workspace ws, const std::vector<std::string>& o) {
  nlohmann::json j = ws.cfg;
  apply_overrides(j, o);
  ws.cfg = j.get<RunConfig>();
  return ws;
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
  const auto c = resolve_config(std::nullopt, {});
  EXPECT_EQ(c.synth.n_train, 40u);
  EXPECT_EQ(c.synth.n_test, 20u);
  EXPECT_EQ(c.tracker.candidates, 256u);
  const auto dir = fs::temp_directory_path() / "cmot_cli_config";
  fs::remove_all(dir);
  write_resolved(c, dir);
  const auto back = resolve_config(dir / kResolvedConfig, {});
  EXPECT_EQ(nlohmann::json(back).dump(), nlohmann::json(c).dump());
  fs::remove_all(dir);
}

TEST(Config, FileMergesAndOverridesWin) {
  const auto dir = fs::temp_directory_path() / "cmot_cli_merge";
  fs::create_directories(dir);
  eval::write_text(dir / "c.json", R"({"seed": 9, "training": {"base_lr": 0.01}, "stages": "one"})");
  const auto c = resolve_config(dir / "c.json", {"training.base_lr=0.5", "net.backbone.layers.0.kernel=3"});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.stages, "one");
  EXPECT_DOUBLE_EQ(c.training.base_lr, 0.5);
  EXPECT_EQ(c.net.backbone.layers[0].kernel, 3u);
  EXPECT_EQ(c.training.stage1_iterations, 500u);
  fs::remove_all(dir);
}

TEST(Config, ErrorsAreConfigErrors) {
  const auto dir = fs::temp_directory_path() / "cmot_cli_bad";
  fs::create_directories(dir);
  eval::write_text(dir / "unknown.json", R"({"training": {"typo": 1}})");
  eval::write_text(dir / "broken.json", "{ nope");
  EXPECT_THROW(resolve_config(dir / "unknown.json", {}), ConfigError);
  EXPECT_THROW(resolve_config(dir / "broken.json", {}), ConfigError);
  EXPECT_THROW(resolve_config(dir / "absent.json", {}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"nokey=1"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"seed"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"seed=abc"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"stages=two"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"training.frames_per_batch=3"}), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, {"eval.pr_threshold=70"}), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, WorkspaceFromEnvironment) {
  ::setenv(kWorkspaceEnv, "/tmp/cmot_env_ws", 1);
  EXPECT_EQ(resolve_workspace(std::nullopt), fs::path("/tmp/cmot_env_ws"));
  EXPECT_EQ(resolve_workspace(fs::path("/x")), fs::path("/x"));
  ::unsetenv(kWorkspaceEnv);
  EXPECT_EQ(resolve_workspace(std::nullopt), fs::current_path());
}

TEST(ExitCodes, FollowErrorKind) {
  EXPECT_EQ(exit_code_of(ConfigError("x")), ExitCode::Config);
  EXPECT_EQ(exit_code_of(ValidationError("x")), ExitCode::Data);
  EXPECT_EQ(exit_code_of(IoError("x")), ExitCode::Data);
  EXPECT_EQ(exit_code_of(ShapeError("x")), ExitCode::Data);
  EXPECT_EQ(exit_code_of(NumericError("x")), ExitCode::Numeric);
}

TEST(Synth, WritesSplitsManifestAndResolvedConfig) {
  auto ws = tiny("synth", {"synth.n_train=40", "synth.n_test=20", "synth.options.max_length=12",
                           "synth.options.image_size=32", "synth.n_dual=5"});
  const auto s = cmd_synth(ws, false);
  EXPECT_EQ(s.train, 40u);
  EXPECT_EQ(s.test, 20u);
  EXPECT_EQ(s.converted + s.discarded, 5u);
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(ws.benchmark() / "train")) on_disk += e.is_directory();
  EXPECT_EQ(on_disk, 40u);
  EXPECT_TRUE(fs::exists(ws.benchmark() / kResolvedConfig));
  const auto first = slurp(ws.benchmark() / "manifest.json");
  EXPECT_THROW(cmd_synth(ws, false), ConfigError);
  cmd_synth(ws, true);
  EXPECT_EQ(slurp(ws.benchmark() / "manifest.json"), first);
  const auto m = synth::manifest_from_json(nlohmann::json::parse(first));
  EXPECT_EQ(m.train.size(), 40u);
  EXPECT_EQ(m.converted.size(), 5u);
  fs::remove_all(ws.root);
}

TEST(Train, ScheduleDecidesCheckpointsAndRerunsAreIdentical) {
  auto ws = tiny("train");
  EXPECT_THROW(cmd_train(ws, "x", false), StructuralError);
  cmd_synth(ws, false);
  const auto a = cmd_train(ws, "a", false);
  EXPECT_EQ(a.result.checkpoints.size(), 3u);
  EXPECT_TRUE(fs::exists(ws.train_dir("a") / "train_log.json"));
  EXPECT_TRUE(fs::exists(ws.train_dir("a") / kResolvedConfig));
  const auto b = cmd_train(ws, "b", false);
  EXPECT_EQ(slurp(ws.train_dir("a") / "stage3.ckpt"), slurp(ws.train_dir("b") / "stage3.ckpt"));
  EXPECT_THROW(cmd_train(ws, "a", false), ConfigError);
  const auto one = cmd_train(with(ws, {"stages=\"one\""}), "one", false);
  ASSERT_EQ(one.result.checkpoints.size(), 1u);
  EXPECT_EQ(final_checkpoint(ws.train_dir("one")).filename(), "one.ckpt");
  fs::remove_all(ws.root);
}

TEST(Track, OneResultAndOneLogLinePerFrame) {
  auto ws = tiny("track");
  cmd_synth(ws, false);
  cmd_train(ws, "m", false);
  const auto s = cmd_track(ws, "m", std::nullopt, false);
  EXPECT_EQ(s.sequences, 2u);
  const auto test = load_split(ws.benchmark() / "test");
  for (const auto& q : test) {
    EXPECT_EQ(read_results(ws.track_dir("m") / (q.id + ".txt")).size(), q.size());
    EXPECT_EQ(read_lines(ws.track_dir("m") / (q.id + ".log.csv")).size(), q.size() + 1);
  }
  // Parallel tracking writes the same bytes.
  cmd_track(with(ws, {"jobs=3"}), "m", final_checkpoint(ws.train_dir("m")), true);
  const auto parallel = slurp(ws.track_dir("m") / (test[0].id + ".txt"));
  cmd_track(ws, "m", std::nullopt, true);
  EXPECT_EQ(slurp(ws.track_dir("m") / (test[0].id + ".txt")), parallel);
  fs::remove_all(ws.root);
}

TEST(Track, BaselineRunsWithoutBlockAndShapeMismatchIsAnError) {
  auto ws = tiny("baseline");
  cmd_synth(ws, false);
  const auto base = with(ws, {"net.use_marmot=false"});
  cmd_train(base, "b", false);
  tracker::TrackNet probe(base.cfg.net);
  EXPECT_FALSE(probe.has_marmot());
  EXPECT_EQ(cmd_track(base, "b", std::nullopt, false).sequences, 2u);
  // A full network cannot load a checkpoint that lacks the block.
  EXPECT_THROW(cmd_track(ws, "full", final_checkpoint(ws.train_dir("b")), false), ShapeError);
  fs::remove_all(ws.root);
}

TEST(Eval, PerfectCopiesScoreOneAndMissingSequenceIsNamed) {
  auto ws = tiny("eval");
  cmd_synth(ws, false);
  const auto test = load_split(ws.benchmark() / "test");
  fs::create_directories(ws.track_dir("perfect"));
  for (const auto& q : test) {
    std::vector<BoundingBox> gt;
    for (const auto& f : q.frames) gt.push_back(f.gt);
    write_results(ws.track_dir("perfect") / (q.id + ".txt"), gt);
  }
  const auto r = cmd_eval(ws, {});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0].overall.pr, 1.0);
  EXPECT_DOUBLE_EQ(r[0].overall.npr, 1.0);
  EXPECT_DOUBLE_EQ(r[0].overall.sr1, 1.0);
  EXPECT_NEAR(r[0].overall.sr2, 1.0, 1e-12);
  fs::remove(ws.track_dir("perfect") / (test[1].id + ".txt"));
  try {
    cmd_eval(ws, {"perfect"});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(test[1].id), std::string::npos);
  }
  fs::remove_all(ws.root);
}

TEST(Eval, TwoTrackersRankedAndReportsRegenerateIdentically) {
  auto ws = tiny("rank");
  cmd_synth(ws, false);
  const auto test = load_split(ws.benchmark() / "test");
  for (const auto& [name, shift] : {std::pair{"near", 1.0}, std::pair{"far", 6.0}}) {
    fs::create_directories(ws.track_dir(name));
    for (const auto& q : test) {
      std::vector<BoundingBox> boxes;
      for (const auto& f : q.frames) boxes.push_back(BoundingBox{f.gt.x + shift, f.gt.y, f.gt.w, f.gt.h});
      write_results(ws.track_dir(name) / (q.id + ".txt"), boxes);
    }
  }
  cmd_eval(ws, {});
  const auto table = read_lines(ws.eval_dir() / "comparison.csv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[1].substr(0, 7), "1,near,");
  EXPECT_EQ(table[2].substr(0, 6), "2,far,");
  const auto out = ws.root / "again";
  cmd_report({ws.eval_dir() / "report.json"}, out);
  for (const char* f : {"report.json", "precision.png", "norm_precision.png", "success.png", "attributes.csv",
                        "comparison.csv"}) {
    EXPECT_GT(fs::file_size(out / f), 0u) << f;
    EXPECT_EQ(slurp(out / f), slurp(ws.eval_dir() / f)) << f;
  }
  fs::remove_all(ws.root);
}

TEST(Binary, ExitCodes) {
  auto run = [](const std::string& args) {
    const int status = std::system((std::string(CMOT_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto root = fs::temp_directory_path() / "cmot_cli_binary";
  fs::remove_all(root);
  const std::string ws = " -w " + root.string();
  EXPECT_EQ(run("train" + ws + " --set training.typo=1"), 2);
  EXPECT_EQ(run("train" + ws), 3);
  EXPECT_EQ(run("synth" + ws + " --set synth.n_train=1 --set synth.n_test=1 --set synth.options.max_length=10 "
                "--set synth.options.min_length=10 --set synth.options.image_size=32"),
            0);
  EXPECT_EQ(run("synth" + ws), 2);
  EXPECT_EQ(run("train" + ws + " --set training.base_lr=1e12 --set training.stage1_iterations=50"), 4);
  fs::remove_all(root);
}
