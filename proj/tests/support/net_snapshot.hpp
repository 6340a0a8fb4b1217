#pragma once

// Bitwise snapshots of network parameters, grouped by parameter group.

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "cmot/tracker/network.hpp"

namespace support {

using Snapshot = std::map<std::string, std::vector<float>>;  // param name -> values

inline Snapshot snapshot(cmot::tracker::TrackNet& net, const std::string& group) {
  Snapshot s;
  net.visit([&](cmot::nn::Param<float>& p) {
    if (p.group == group) s[p.name].assign(p.value.values().begin(), p.value.values().end());
  });
  return s;
}

inline std::map<std::string, Snapshot> snapshot_all(cmot::tracker::TrackNet& net) {
  std::map<std::string, Snapshot> out;
  for (const auto& g : net.groups()) out[g] = snapshot(net, g);
  return out;
}

inline bool bit_identical(const Snapshot& a, const Snapshot& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, v] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second.size() != v.size()) return false;
    if (std::memcmp(v.data(), it->second.data(), v.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

inline double sum_sq_grad(cmot::tracker::TrackNet& net, const std::string& group) {
  double s = 0.0;
  net.visit([&](cmot::nn::Param<float>& p) {
    if (p.group == group)
      for (float g : p.grad.values()) s += static_cast<double>(g) * g;
  });
  return s;
}

}  // namespace support
