#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "coff/error.hpp"

namespace coff {

/// 8-bit RGB raster, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width == 0 || height == 0; }

  std::uint8_t* at(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }

  /// Channel value in [0, 1].
  double value(int x, int y, int c) const { return at(x, y)[c] / 255.0; }

  bool operator==(const RgbImage&) const = default;
};

/// Per-pixel descriptor raster (H x W x dim, row-major float).
struct FeatureRaster {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> data;

  const float* at(int x, int y) const { return &data[(static_cast<std::size_t>(y) * width + x) * dim]; }
  float* at(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * dim]; }

  bool operator==(const FeatureRaster&) const = default;
};

/// Crops [x0, x1] x [y0, y1] (inclusive) and resamples it to out_w x out_h
/// with bilinear interpolation (pixel centers aligned).
inline RgbImage crop_resize_bilinear(const RgbImage& img, int x0, int y0, int x1, int y1, int out_w, int out_h) {
  if (x0 > x1 || y0 > y1 || x0 < 0 || y0 < 0 || x1 >= img.width || y1 >= img.height) {
    throw Error(ErrorCode::InvalidArgument, "crop window outside image");
  }
  RgbImage out(out_w, out_h);
  const double cw = x1 - x0 + 1, ch = y1 - y0 + 1;
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = std::clamp((oy + 0.5) * ch / out_h - 0.5, 0.0, ch - 1.0) + y0;
    const int ya = static_cast<int>(std::floor(sy));
    const int yb = std::min(ya + 1, y1);
    const double fy = sy - ya;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = std::clamp((ox + 0.5) * cw / out_w - 0.5, 0.0, cw - 1.0) + x0;
      const int xa = static_cast<int>(std::floor(sx));
      const int xb = std::min(xa + 1, x1);
      const double fx = sx - xa;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * img.at(xa, ya)[c] + fx * img.at(xb, ya)[c]) +
                         fy * ((1 - fx) * img.at(xa, yb)[c] + fx * img.at(xb, yb)[c]);
        out.at(ox, oy)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace coff
