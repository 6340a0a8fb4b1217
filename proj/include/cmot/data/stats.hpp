#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cmot/data/sequence.hpp"
#include "cmot/rng.hpp"

namespace cmot {

inline std::size_t modality_switch_count(std::span<const Modality> labels) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] != labels[i - 1];
  return n;
}

inline std::size_t modality_switch_count(const Sequence& seq) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < seq.frames.size(); ++i)
    n += seq.frames[i].modality != seq.frames[i - 1].modality;
  return n;
}

/// Switch-count bins: none, once, twice, three, more (> 3).
enum class SwitchBin { None, Once, Twice, Three, More };

inline SwitchBin switch_bin(std::size_t switches) {
  switch (switches) {
    case 0: return SwitchBin::None;
    case 1: return SwitchBin::Once;
    case 2: return SwitchBin::Twice;
    case 3: return SwitchBin::Three;
    default: return SwitchBin::More;
  }
}

inline std::string to_string(SwitchBin b) {
  static constexpr const char* names[] = {"none", "once", "twice", "three", "more"};
  return names[static_cast<int>(b)];
}

inline SwitchBin parse_switch_bin(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (to_string(static_cast<SwitchBin>(i)) == s) return static_cast<SwitchBin>(i);
  throw ParseError("unknown switch bin '" + s + "'");
}

inline std::map<SwitchBin, std::size_t> switch_histogram(std::span<const std::size_t> counts) {
  std::map<SwitchBin, std::size_t> h;
  for (auto c : counts) ++h[switch_bin(c)];
  return h;
}

inline std::map<SwitchBin, std::size_t> switch_histogram(std::span<const Sequence> seqs) {
  std::vector<std::size_t> counts;
  for (const auto& s : seqs) counts.push_back(modality_switch_count(s));
  return switch_histogram(counts);
}

struct IdSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Random 2:1 train/test partition; |test| = round(n / 3). Depends only on
/// the set of ids and the seed.
inline IdSplit split_ids(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.size() < 3) throw ValidationError("split_dataset needs at least 3 sequences");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("split_dataset: duplicate sequence id");
  Rng rng(derive_seed(seed, "split"));
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(ids.size()) / 3.0));
  IdSplit out;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_test ? out.test : out.train).push_back(ids[order[k]]);
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

struct DatasetSplit {
  std::vector<Sequence> train;
  std::vector<Sequence> test;
};

inline DatasetSplit split_dataset(const std::vector<Sequence>& seqs, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& s : seqs) ids.push_back(s.id);
  const IdSplit split = split_ids(ids, seed);
  DatasetSplit out;
  for (const auto& s : seqs) {
    const bool is_test = std::binary_search(split.test.begin(), split.test.end(), s.id);
    (is_test ? out.test : out.train).push_back(s);
  }
  return out;
}

}  // namespace cmot
