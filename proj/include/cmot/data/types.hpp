#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "cmot/error.hpp"

namespace cmot {

/// Axis-aligned box in continuous pixel coordinates, top-left origin.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0 &&
           h > 0;
  }

  void validate() const {
    if (!valid())
      throw ValidationError("invalid box (" + std::to_string(x) + "," + std::to_string(y) + "," +
                            std::to_string(w) + "," + std::to_string(h) + ")");
  }

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  /// Intersection with [0,width) x [0,height). May be empty (w or h <= 0).
  BoundingBox clipped(double width, double height) const {
    const double x0 = std::clamp(x, 0.0, width), y0 = std::clamp(y, 0.0, height);
    const double x1 = std::clamp(x + w, 0.0, width), y1 = std::clamp(y + h, 0.0, height);
    return {x0, y0, x1 - x0, y1 - y0};
  }

  bool operator==(const BoundingBox&) const = default;
};

enum class Modality { RGB = 0, NIR = 1 };

inline constexpr std::array<Modality, 2> kModalities{Modality::RGB, Modality::NIR};

inline std::string_view to_string(Modality m) { return m == Modality::RGB ? "RGB" : "NIR"; }

inline Modality other(Modality m) { return m == Modality::RGB ? Modality::NIR : Modality::RGB; }

inline Modality parse_modality(std::string_view s, std::size_t line = 0) {
  if (s == "RGB") return Modality::RGB;
  if (s == "NIR") return Modality::NIR;
  throw ParseError("unknown modality token '" + std::string(s) + "'", line);
}

/// Challenge attributes of the cross-modal benchmark taxonomy.
enum class AttributeTag { SV, BC, ARC, SO, FM, IPR, OV, PO, MA, FO, MB };

inline constexpr std::array<AttributeTag, 11> kAttributeTags{
    AttributeTag::SV, AttributeTag::BC, AttributeTag::ARC, AttributeTag::SO,
    AttributeTag::FM, AttributeTag::IPR, AttributeTag::OV, AttributeTag::PO,
    AttributeTag::MA, AttributeTag::FO, AttributeTag::MB};

inline constexpr std::array<std::string_view, 11> kAttributeNames{
    "SV", "BC", "ARC", "SO", "FM", "IPR", "OV", "PO", "MA", "FO", "MB"};

inline std::string_view to_string(AttributeTag a) {
  return kAttributeNames[static_cast<std::size_t>(a)];
}

inline AttributeTag parse_attribute(std::string_view s, std::size_t line = 0) {
  for (std::size_t i = 0; i < kAttributeNames.size(); ++i)
    if (kAttributeNames[i] == s) return kAttributeTags[i];
  throw ParseError("unknown attribute tag '" + std::string(s) + "'", line);
}

}  // namespace cmot
