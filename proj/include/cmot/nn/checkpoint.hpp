#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "cmot/error.hpp"
#include "cmot/nn/param.hpp"

namespace cmot::nn {

/// Binary layout (all integers little-endian):
///   "CMOTCKPT" u32 version u32 count
///   count x { u32 name_len, name bytes, u32 ndim(=4), 4 x u32 dims, float32 data }
/// Entries are written in key order, so equal maps produce equal files.
using Checkpoint = std::map<std::string, Tensor<float>>;

inline constexpr char kCheckpointMagic[8] = {'C', 'M', 'O', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint (" + what + ")");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& [name, t] : ckpt) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, 4);
    const Shape4 s = t.shape();
    for (auto d : {s.n, s.c, s.h, s.w}) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float v : t.values()) detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("not a checkpoint file: " + path.string());
  const auto version = detail::get_u32(is, "version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get_u32(is, "count");
  Checkpoint out;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name(detail::get_u32(is, "name length"), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw IoError("truncated checkpoint (name)");
    const auto ndim = detail::get_u32(is, "ndim");
    if (ndim != 4) throw ParseError("checkpoint entry " + name + " has ndim " + std::to_string(ndim));
    Shape4 s;
    s.n = detail::get_u32(is, name);
    s.c = detail::get_u32(is, name);
    s.h = detail::get_u32(is, name);
    s.w = detail::get_u32(is, name);
    Tensor<float> t(s);
    for (auto& v : t.values()) v = std::bit_cast<float>(detail::get_u32(is, name));
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

/// Parameters and buffers of any module exposing visit/visit_buffers.
template <typename Module>
Checkpoint capture(Module& m) {
  Checkpoint c;
  m.visit([&](auto& p) { c[p.name] = p.value.template cast<float>(); });
  m.visit_buffers([&](auto& b) { c[b.name] = b.value.template cast<float>(); });
  return c;
}

/// Copies every module entry from `c`. A missing key or a shape difference is a
/// ShapeError; extra keys are ignored when `allow_extra` (e.g. loading a full
/// checkpoint into a network built without the block).
template <typename Module>
void restore(Module& m, const Checkpoint& c, bool allow_extra = false) {
  std::size_t used = 0;
  auto copy = [&](const std::string& name, auto& dst) {
    auto it = c.find(name);
    if (it == c.end()) throw ShapeError("checkpoint has no entry " + name);
    if (!(it->second.shape() == dst.shape()))
      throw ShapeError("checkpoint entry " + name + " has shape " + it->second.shape().str() +
                       ", network expects " + dst.shape().str());
    using V = typename std::remove_reference_t<decltype(dst)>::value_type;
    dst = it->second.template cast<V>();
    ++used;
  };
  m.visit([&](auto& p) { copy(p.name, p.value); });
  m.visit_buffers([&](auto& b) { copy(b.name, b.value); });
  if (!allow_extra && used != c.size())
    throw ShapeError("checkpoint has " + std::to_string(c.size() - used) +
                     " entries the network does not define");
}

}  // namespace cmot::nn
