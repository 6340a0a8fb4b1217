#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "cmot/error.hpp"

namespace cmot {

/// 8-bit RGB image, row-major HxWx3. Intensities read back as floats in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height) : width_(width), height_(height), data_(3u * width * height, 0) {
    if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  float at(int y, int x, int c) const { return data_[index(y, x, c)] * (1.0f / 255.0f); }
  std::uint8_t raw(int y, int x, int c) const { return data_[index(y, x, c)]; }

  /// Stores v clamped to [0,1], rounded to the nearest 8-bit level.
  void set(int y, int x, int c, float v) {
    const float q = v <= 0.f ? 0.f : (v >= 1.f ? 255.f : v * 255.f + 0.5f);
    data_[index(y, x, c)] = static_cast<std::uint8_t>(q);
  }

  const std::vector<std::uint8_t>& bytes() const { return data_; }
  std::vector<std::uint8_t>& bytes() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

inline Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  Image img(bgr.cols, bgr.rows);
  auto& out = img.bytes();
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * bgr.cols + x) * 3;
      out[i] = row[x][2];
      out[i + 1] = row[x][1];
      out[i + 2] = row[x][0];
    }
  }
  return img;
}

inline void write_image(const std::filesystem::path& path, const Image& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  const auto& in = img.bytes();
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * 3;
      row[x] = cv::Vec3b(in[i + 2], in[i + 1], in[i]);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image " + path.string());
}

}  // namespace cmot
