#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aerostitch/error.hpp"

namespace aerostitch {

/// Row-major image with 1 or 3 channels, samples in [0, 1].
/// Pixel (x, y) has its center at coordinate (x, y).
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    check_shape();
    if (!(fill >= 0.0 && fill <= 1.0)) throw Error(ErrorCode::InvalidConfig, "fill outside [0,1]");
    samples_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  ImageBuffer(int width, int height, int channels, std::vector<double> samples)
      : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
    check_shape();
    if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorCode::InvalidConfig, "sample count does not match image shape");
    }
    for (double v : samples_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorCode::InvalidConfig, "image sample outside [0,1]");
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return samples_.empty(); }

  double at(int x, int y, int c = 0) const { return samples_[index(x, y, c)]; }

  /// Writes a sample, clamped into [0, 1].
  void set(int x, int y, int c, double v) { samples_[index(x, y, c)] = std::clamp(v, 0.0, 1.0); }

  const std::vector<double>& samples() const { return samples_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  void check_shape() const {
    if (width_ <= 0 || height_ <= 0 || (channels_ != 1 && channels_ != 3)) {
      throw Error(ErrorCode::InvalidConfig, "bad image shape " + std::to_string(width_) + "x" +
                                                std::to_string(height_) + "x" +
                                                std::to_string(channels_));
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> samples_;
};

/// Bilinear sample with edge clamping. Caller decides what "inside" means.
inline double sample_bilinear(const ImageBuffer& img, double x, double y, int c = 0) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = std::min(static_cast<int>(x), img.width() - 1);
  const int y0 = std::min(static_cast<int>(y), img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
  const double bottom = (1.0 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
  return (1.0 - ay) * top + ay * bottom;
}

/// Rec. 601 luma for RGB, identity for gray.
inline ImageBuffer to_gray(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.set(x, y, 0, 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2));
    }
  }
  return out;
}

}  // namespace aerostitch
