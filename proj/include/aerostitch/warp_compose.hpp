#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/image.hpp"
#include "aerostitch/transform_pipeline.hpp"

namespace aerostitch {

struct FrameSize {
  int width = 0;
  int height = 0;
};

struct CanvasBounds {
  Eigen::Vector2i origin = Eigen::Vector2i::Zero();
  int width = 0;
  int height = 0;
};

/// Integer bounding box of every frame's mapped corners.
inline CanvasBounds canvas_bounds(std::span<const FrameSize> sizes,
                                  std::span<const Homography> transforms) {
  if (sizes.size() != transforms.size() || sizes.empty()) {
    throw Error(ErrorCode::InvalidConfig, "canvas_bounds needs one transform per frame");
  }
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const CornerSet c = map_corners(transforms[i], sizes[i].width, sizes[i].height);
    for (const auto& p : c.points) {
      min_x = std::min(min_x, p.x());
      min_y = std::min(min_y, p.y());
      max_x = std::max(max_x, p.x());
      max_y = std::max(max_y, p.y());
    }
  }
  CanvasBounds b;
  b.origin = {static_cast<int>(std::floor(min_x)), static_cast<int>(std::floor(min_y))};
  b.width = static_cast<int>(std::ceil(max_x)) - b.origin.x();
  b.height = static_cast<int>(std::ceil(max_y)) - b.origin.y();
  if (b.width <= 0 || b.height <= 0) throw Error(ErrorCode::InvalidConfig, "empty canvas");
  return b;
}

/// Running weighted sum of warped frames. Canvas pixel (i, j) sits at mosaic
/// coordinate (i + origin.x, j + origin.y).
class MosaicCanvas {
 public:
  MosaicCanvas(const CanvasBounds& bounds, int channels)
      : bounds_(bounds), channels_(channels) {
    if (bounds.width <= 0 || bounds.height <= 0 || (channels != 1 && channels != 3)) {
      throw Error(ErrorCode::InvalidConfig, "bad canvas shape");
    }
    const auto n = static_cast<std::size_t>(bounds.width) * bounds.height;
    accumulator_.assign(n * channels, 0.0);
    weight_.assign(n, 0.0);
  }

  const Eigen::Vector2i& origin() const { return bounds_.origin; }
  int width() const { return bounds_.width; }
  int height() const { return bounds_.height; }
  int channels() const { return channels_; }

  double weight(int x, int y) const { return weight_[pixel(x, y)]; }
  double accumulated(int x, int y, int c) const { return accumulator_[pixel(x, y) * channels_ + c]; }

  void add(int x, int y, const double* values, double w) {
    const std::size_t p = pixel(x, y);
    weight_[p] += w;
    for (int c = 0; c < channels_; ++c) accumulator_[p * channels_ + c] += w * values[c];
  }

 private:
  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * bounds_.width + x; }

  CanvasBounds bounds_;
  int channels_;
  std::vector<double> accumulator_;
  std::vector<double> weight_;
};

struct BlendOptions {
  /// Feather margin as a fraction of the smaller source dimension.
  double feather = 0.1;
  /// Worker threads for warping; 0 picks hardware concurrency.
  unsigned threads = 0;
};

/// Distance to the nearest source border (the border runs half a pixel
/// outside the outermost pixel centers), divided by the margin and clamped
/// to [0, 1].
inline double feather_weight(double x, double y, int width, int height, double margin) {
  const double d = std::min({x + 0.5, width - 0.5 - x, y + 0.5, height - 0.5 - y});
  if (d <= 0.0) return 0.0;
  if (margin <= 0.0) return 1.0;
  return std::min(1.0, d / margin);
}

/// Runs fn(row_begin, row_end) over disjoint row bands.
template <typename Fn>
void parallel_rows(int rows, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(rows, 1)));
  if (threads <= 1) {
    fn(0, rows);
    return;
  }
  std::vector<std::jthread> workers;
  const int band = (rows + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (int begin = 0; begin < rows; begin += band) {
    workers.emplace_back([&fn, begin, end = std::min(rows, begin + band)] { fn(begin, end); });
  }
}

/// Inverse-warps `image` into the canvas; `to_mosaic` maps source pixels to
/// mosaic coordinates. Each canvas row band is owned by one worker.
inline void warp_into(MosaicCanvas& canvas, const ImageBuffer& image, const Homography& to_mosaic,
                      const BlendOptions& options = {}) {
  const Matrix3 inv = to_mosaic.inverse().matrix();
  const int w = image.width(), h = image.height();
  const double margin = options.feather * std::min(w, h);
  const int channels = canvas.channels();
  if (image.channels() != channels && image.channels() != 1) {
    throw Error(ErrorCode::InvalidConfig, "cannot warp an RGB frame into a gray canvas");
  }

  // Footprint box in canvas pixels; the whole canvas if a corner escapes.
  int x_begin = 0, x_end = canvas.width(), y_begin = 0, y_end = canvas.height();
  try {
    const CornerSet c = map_corners(to_mosaic, w, h);
    double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x, hi_x = -lo_x, hi_y = -lo_x;
    for (const auto& p : c.points) {
      lo_x = std::min(lo_x, p.x() - 1.0);
      lo_y = std::min(lo_y, p.y() - 1.0);
      hi_x = std::max(hi_x, p.x() + 1.0);
      hi_y = std::max(hi_y, p.y() + 1.0);
    }
    const auto& o = canvas.origin();
    x_begin = std::clamp(static_cast<int>(std::floor(lo_x)) - o.x(), 0, canvas.width());
    x_end = std::clamp(static_cast<int>(std::ceil(hi_x)) - o.x() + 1, 0, canvas.width());
    y_begin = std::clamp(static_cast<int>(std::floor(lo_y)) - o.y(), 0, canvas.height());
    y_end = std::clamp(static_cast<int>(std::ceil(hi_y)) - o.y() + 1, 0, canvas.height());
  } catch (const Error&) {
  }

  const Eigen::Vector2i origin = canvas.origin();
  parallel_rows(y_end - y_begin, options.threads, [&](int band_begin, int band_end) {
    double values[3];
    for (int j = y_begin + band_begin; j < y_begin + band_end; ++j) {
      for (int i = x_begin; i < x_end; ++i) {
        const Vec3 q = inv * Vec3(i + origin.x(), j + origin.y(), 1.0);
        if (std::abs(q.z()) < 1e-12) continue;
        const double sx = q.x() / q.z(), sy = q.y() / q.z();
        if (sx < -0.5 || sx > w - 0.5 || sy < -0.5 || sy > h - 0.5) continue;
        const double fw = feather_weight(sx, sy, w, h, margin);
        if (fw <= 0.0) continue;
        for (int c = 0; c < channels; ++c) {
          values[c] = sample_bilinear(image, sx, sy, image.channels() == 1 ? 0 : c);
        }
        canvas.add(i, j, values, fw);
      }
    }
  });
}

/// Weighted mean where any frame contributed, zero elsewhere.
inline ImageBuffer finalize(const MosaicCanvas& canvas) {
  ImageBuffer out(canvas.width(), canvas.height(), canvas.channels());
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      const double w = canvas.weight(x, y);
      if (w <= 0.0) continue;
      for (int c = 0; c < canvas.channels(); ++c) out.set(x, y, c, canvas.accumulated(x, y, c) / w);
    }
  }
  return out;
}

/// Convenience: bounds, warp every frame, finalize.
struct Mosaic {
  ImageBuffer image;
  Eigen::Vector2i origin = Eigen::Vector2i::Zero();
};

inline Mosaic compose_mosaic(std::span<const ImageBuffer> frames,
                             std::span<const Homography> to_reference,
                             const BlendOptions& options = {}) {
  std::vector<FrameSize> sizes;
  int channels = 1;
  for (const auto& f : frames) {
    sizes.push_back({f.width(), f.height()});
    channels = std::max(channels, f.channels());
  }
  MosaicCanvas canvas(canvas_bounds(sizes, to_reference), channels);
  for (std::size_t i = 0; i < frames.size(); ++i) warp_into(canvas, frames[i], to_reference[i], options);
  return {finalize(canvas), canvas.origin()};
}

}  // namespace aerostitch
