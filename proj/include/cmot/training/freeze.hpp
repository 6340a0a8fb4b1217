#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cmot/nn/sgd.hpp"
#include "cmot/tracker/network.hpp"

namespace cmot::training {

/// Every group name a network may define. "head" is accepted as shorthand
/// for both head layers.
inline const std::vector<std::string>& all_groups() {
  static const std::vector<std::string> g{
      tracker::kGroupBackbone,  marmot::kGroupBranchRgb,    marmot::kGroupBranchNir,
      marmot::kGroupEnsemble,   tracker::kGroupHeadHidden, tracker::kGroupHeadFinal};
  return g;
}

inline std::map<std::string, double> expand_groups(const std::map<std::string, double>& lr) {
  std::map<std::string, double> out;
  for (const auto& [g, v] : lr) {
    if (g == "head") {
      out.emplace(tracker::kGroupHeadHidden, v);
      out.emplace(tracker::kGroupHeadFinal, v);
    } else {
      out[g] = v;
    }
  }
  return out;
}

struct OptimizerGroup {
  std::string group;
  double lr = 0.0;
  std::vector<nn::Param<float>*> params;
};

/// Parameters the optimiser may touch, grouped with their learning rates.
/// Everything outside the binding receives no gradient and no update. Holds
/// pointers into the network it was made from; rebind after copying it.
struct OptimizerBinding {
  std::vector<OptimizerGroup> groups;

  std::vector<nn::Sgd<float>::Entry> entries() const {
    std::vector<nn::Sgd<float>::Entry> e;
    for (const auto& g : groups)
      for (auto* p : g.params) e.push_back({p, g.lr});
    return e;
  }

  void zero_grad() const {
    for (const auto& g : groups)
      for (auto* p : g.params) p->zero_grad();
  }

  double lr(const std::string& group) const {
    for (const auto& g : groups)
      if (g.group == group) return g.lr;
    throw ConfigError("group '" + group + "' is not bound");
  }
};

/// Restricts gradient flow to the groups keyed in `lr` and binds their
/// parameters. Unknown or absent group names and an empty mask are
/// configuration errors.
inline OptimizerBinding apply_freeze_mask(tracker::TrackNet& net,
                                          const std::map<std::string, double>& lr) {
  const auto groups = expand_groups(lr);
  if (groups.empty()) throw ConfigError("freeze mask leaves nothing to train");
  const auto present = net.groups();
  std::set<std::string> names;
  for (const auto& [g, v] : groups) {
    if (std::find(all_groups().begin(), all_groups().end(), g) == all_groups().end())
      throw ConfigError("unknown parameter group '" + g + "'");
    if (std::find(present.begin(), present.end(), g) == present.end())
      throw ConfigError("parameter group '" + g + "' does not exist in this network");
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("learning rate for group '" + g + "' must be positive");
    names.insert(g);
  }
  net.set_trainable(names);
  OptimizerBinding b;
  for (const auto& [g, v] : groups) b.groups.push_back({g, v, {}});
  net.visit([&](nn::Param<float>& p) {
    for (auto& g : b.groups)
      if (g.group == p.group) g.params.push_back(&p);
  });
  return b;
}

}  // namespace cmot::training
