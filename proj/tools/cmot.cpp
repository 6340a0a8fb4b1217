// cmot: synth -> train -> track -> eval -> report over a workspace directory.

#include <iostream>

#include <CLI11.hpp>

#include "cmot/cli/commands.hpp"

namespace {

using namespace cmot;
using namespace cmot::cli;

struct Common {
  std::optional<fs::path> workspace;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string name;
  bool force = false;
  bool no_marmot = false;
  std::optional<std::string> stages;
};

void add_common(CLI::App* cmd, Common& o) {
  cmd->add_option("-w,--workspace", o.workspace, "Workspace root (default: $" + std::string(kWorkspaceEnv) + " or .)");
  cmd->add_option("-c,--config", o.config, "JSON config file merged over the defaults");
  cmd->add_option("--set", o.overrides, "Override a config value, e.g. --set training.stage1_iterations=200");
  cmd->add_option("--seed", o.seed, "Master seed");
}

Workspace make_workspace(const Common& o) {
  auto overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (o.jobs) overrides.push_back("jobs=" + std::to_string(*o.jobs));
  if (o.stages) overrides.push_back("stages=\"" + *o.stages + "\"");
  if (o.no_marmot) overrides.push_back("net.use_marmot=false");
  return {resolve_workspace(o.workspace), resolve_config(o.config, overrides)};
}

void say(const std::string& line) { std::cout << line << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal tracking toolkit"};
  app.require_subcommand(1);
  Common o;
  std::optional<fs::path> checkpoint;
  std::vector<std::string> trackers;
  std::vector<fs::path> inputs;
  fs::path out = "report";

  auto* synth = app.add_subcommand("synth", "Generate the toy benchmark and converted sequences");
  add_common(synth, o);
  synth->add_flag("--force", o.force, "Replace an existing benchmark");

  auto* train = app.add_subcommand("train", "Train a network on the benchmark's training split");
  add_common(train, o);
  train->add_option("--stages", o.stages, "three (default) or one")->check(CLI::IsMember({"three", "one"}));
  train->add_flag("--no-marmot", o.no_marmot, "Train the baseline without the modality-aware block");
  train->add_option("--name", o.name, "Run name (default: <marmot|baseline>-<stages>)");
  train->add_flag("--force", o.force, "Replace an existing run");

  auto* track = app.add_subcommand("track", "Track the test split with a trained checkpoint");
  add_common(track, o);
  track->add_option("--stages", o.stages, "Schedule the run was trained with")->check(CLI::IsMember({"three", "one"}));
  track->add_flag("--no-marmot", o.no_marmot, "Run the baseline network without the block");
  track->add_option("--name", o.name, "Run name (default: <marmot|baseline>-<stages>)");
  track->add_option("--checkpoint", checkpoint, "Checkpoint file (default: final checkpoint of the run)");
  track->add_option("-j,--jobs", o.jobs, "Sequences tracked in parallel");
  track->add_flag("--force", o.force, "Replace existing results");

  auto* ev = app.add_subcommand("eval", "Score tracking results against the test split");
  add_common(ev, o);
  ev->add_option("--trackers", trackers, "Run names to evaluate (default: all tracked runs)");

  auto* report = app.add_subcommand("report", "Render plots and tables from saved report JSON files");
  report->add_option("inputs", inputs, "report.json files")->required();
  report->add_option("-o,--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      cmd_report(inputs, out, say);
      return 0;
    }
    const Workspace ws = make_workspace(o);
    const std::string name = o.name.empty() ? variant_name(ws.cfg) : o.name;
    if (synth->parsed()) cmd_synth(ws, o.force, say);
    if (train->parsed()) cmd_train(ws, name, o.force, say);
    if (track->parsed()) cmd_track(ws, name, checkpoint, o.force, say);
    if (ev->parsed()) cmd_eval(ws, trackers, say);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "cmot: " << e.what() << std::endl;
    return static_cast<int>(exit_code_of(e));
  }
}
