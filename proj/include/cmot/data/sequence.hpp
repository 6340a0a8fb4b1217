#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cmot/data/image.hpp"
#include "cmot/data/types.hpp"

namespace cmot {

struct FrameRecord {
  std::shared_ptr<const Image> image;
  Modality modality = Modality::RGB;
  BoundingBox gt;
  /// False while the target is fully occluded or out of view; gt then holds
  /// the last visible box.
  bool visible = true;
};

struct Sequence {
  std::string id;
  std::vector<FrameRecord> frames;
  std::set<AttributeTag> attributes;

  std::size_t size() const { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().image->width(); }
  int height() const { return frames.empty() ? 0 : frames.front().image->height(); }

  std::vector<BoundingBox> ground_truth() const {
    std::vector<BoundingBox> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.gt);
    return out;
  }

  std::vector<Modality> modalities() const {
    std::vector<Modality> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(f.modality);
    return out;
  }

  void validate() const {
    if (frames.empty()) throw ValidationError("sequence '" + id + "' has no frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      if (!f.image || f.image->empty())
        throw ValidationError("sequence '" + id + "' frame " + std::to_string(i + 1) + " has no image");
      if (f.image->width() != width() || f.image->height() != height())
        throw ValidationError("sequence '" + id + "' frame " + std::to_string(i + 1) +
                              " differs in image size");
      f.gt.validate();
    }
  }
};

}  // namespace cmot
