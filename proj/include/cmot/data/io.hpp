#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmot/data/sequence.hpp"

namespace cmot {

namespace fs = std::filesystem;

/// Locale-independent parse of a whole token as a double.
inline double parse_double(std::string_view tok, std::size_t line = 0) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
    tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("not a number: '" + std::string(tok) + "'", line);
  return v;
}

/// Shortest fixed-notation text that reads back to exactly the same double.
inline std::string format_double(double v) {
  char buf[512];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses `x,y,w,h` lines. Values are not validated beyond being numbers.
inline std::vector<BoundingBox> read_box_lines(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<BoundingBox> boxes;
  boxes.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto parts = split(lines[i], ',');
    if (parts.size() != 4)
      throw ParseError(path.filename().string() + ": expected 'x,y,w,h', got '" + lines[i] + "'", i + 1);
    boxes.push_back({parse_double(parts[0], i + 1), parse_double(parts[1], i + 1),
                     parse_double(parts[2], i + 1), parse_double(parts[3], i + 1)});
  }
  return boxes;
}

inline void write_box_lines(const fs::path& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& b : boxes)
    out << format_double(b.x) << ',' << format_double(b.y) << ',' << format_double(b.w) << ','
        << format_double(b.h) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// Tracker output: one `x,y,w,h` line per frame.
inline void write_results(const fs::path& path, const std::vector<BoundingBox>& boxes) {
  if (boxes.empty()) throw ValidationError("write_results: no boxes");
  write_box_lines(path, boxes);
}

inline std::vector<BoundingBox> read_results(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("results file not found: " + path.string());
  return read_box_lines(path);
}

struct LoadWarning {
  std::size_t frame = 0;  // 1-based
  std::string message;
};

namespace detail {

inline std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw StructuralError("missing frame directory " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline void require_count(const std::string& what, std::size_t got, std::size_t expected) {
  if (got != expected)
    throw StructuralError(what + " has " + std::to_string(got) + " lines, expected " +
                          std::to_string(expected));
}

}  // namespace detail

/// Loads a sequence directory:
///   img/000001.png ...   frames in lexicographic order
///   groundtruth.txt      x,y,w,h per frame
///   modality.txt         RGB or NIR per frame
///   attributes.txt       optional, comma-separated tags
///   visible.txt          optional, 0/1 per frame
/// Boxes are clipped to the image. A hidden frame whose box differs from the
/// previous one is accepted with a warning.
inline Sequence load_sequence(const fs::path& root, std::vector<LoadWarning>* warnings = nullptr) {
  if (!fs::is_directory(root)) throw StructuralError("not a sequence directory: " + root.string());
  Sequence seq;
  seq.id = root.filename().string();
  if (seq.id.empty()) seq.id = root.parent_path().filename().string();

  const auto frames = detail::list_frames(root / "img");
  if (frames.empty()) throw StructuralError("sequence '" + seq.id + "' has no frames");
  const auto boxes = read_box_lines(root / "groundtruth.txt");
  detail::require_count("groundtruth.txt", boxes.size(), frames.size());

  const auto mod_lines = read_lines(root / "modality.txt");
  detail::require_count("modality.txt", mod_lines.size(), frames.size());

  std::vector<bool> visible(frames.size(), true);
  if (fs::exists(root / "visible.txt")) {
    const auto lines = read_lines(root / "visible.txt");
    detail::require_count("visible.txt", lines.size(), frames.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i] == "0") visible[i] = false;
      else if (lines[i] != "1") throw ParseError("visible.txt: expected 0 or 1", i + 1);
    }
  }

  if (fs::exists(root / "attributes.txt")) {
    const auto lines = read_lines(root / "attributes.txt");
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (auto tok : split(lines[i], ',')) {
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (!tok.empty()) seq.attributes.insert(parse_attribute(tok, i + 1));
      }
  }

  seq.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    FrameRecord f;
    f.image = std::make_shared<const Image>(read_image(frames[i]));
    f.modality = parse_modality(mod_lines[i], i + 1);
    f.visible = visible[i];
    const BoundingBox& b = boxes[i];
    if (!b.valid())
      throw ValidationError("groundtruth.txt line " + std::to_string(i + 1) +
                            ": box must have finite fields and positive size");
    f.gt = b.clipped(f.image->width(), f.image->height());
    if (!f.gt.valid())
      throw ValidationError("groundtruth.txt line " + std::to_string(i + 1) + ": box outside image");
    if (!f.visible && i > 0 && !(f.gt == seq.frames.back().gt) && warnings)
      warnings->push_back({i + 1, "hidden target but box differs from the previous frame"});
    seq.frames.push_back(std::move(f));
  }
  seq.validate();
  return seq;
}

/// Writes `seq` in the layout read by load_sequence. Frames are PNG.
inline void save_sequence(const Sequence& seq, const fs::path& root) {
  seq.validate();
  fs::create_directories(root / "img");
  std::ofstream mod(root / "modality.txt", std::ios::binary), vis(root / "visible.txt", std::ios::binary);
  bool any_hidden = false;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", i + 1);
    write_image(root / "img" / name, *seq.frames[i].image);
    mod << to_string(seq.frames[i].modality) << '\n';
    vis << (seq.frames[i].visible ? '1' : '0') << '\n';
    any_hidden |= !seq.frames[i].visible;
  }
  vis.close();
  if (!any_hidden) fs::remove(root / "visible.txt");
  write_box_lines(root / "groundtruth.txt", seq.ground_truth());
  std::ofstream attr(root / "attributes.txt", std::ios::binary);
  bool first = true;
  for (auto a : seq.attributes) {
    attr << (first ? "" : ",") << to_string(a);
    first = false;
  }
  attr << '\n';
  if (!mod || !attr) throw IoError("cannot write sequence files under " + root.string());
}

}  // namespace cmot
