#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "utfe/data/image.hpp"

namespace utfe::data {

/// Region of interest in pixel coordinates.
struct Roi {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

inline Roi full_frame(const Image& image) { return {0, 0, image.height(), image.width()}; }

/// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Taps {
  long first;
  double w[4];
};

// Half-pixel-centre mapping from output index to source coordinate.
inline std::vector<Taps> cubic_taps(std::size_t in, std::size_t out) {
  std::vector<Taps> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double frac = src - base;
    taps[i].first = static_cast<long>(base) - 1;
    for (int k = 0; k < 4; ++k) taps[i].w[k] = cubic_weight(frac - static_cast<double>(k - 1));
  }
  return taps;
}

inline long clamp_index(long i, std::size_t n) {
  return i < 0 ? 0 : (i >= static_cast<long>(n) ? static_cast<long>(n) - 1 : i);
}

}  // namespace detail

/// Separable bicubic resampling with edge clamping.
inline Tensor resize_bicubic(const Tensor& src, std::size_t out_h, std::size_t out_w) {
  if (src.rank() != 2) throw ShapeError("resize_bicubic expects an [H, W] image");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bicubic target must be non-empty");
  const std::size_t in_h = src.extent(0), in_w = src.extent(1);
  const auto tx = detail::cubic_taps(in_w, out_w);
  const auto ty = detail::cubic_taps(in_h, out_h);
  std::vector<double> rows(in_h * out_w);
  for (std::size_t y = 0; y < in_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k)
        acc += tx[x].w[k] * src.at(y, static_cast<std::size_t>(detail::clamp_index(tx[x].first + k, in_w)));
      rows[y * out_w + x] = acc;
    }
  Tensor out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k)
        acc += ty[y].w[k] * rows[static_cast<std::size_t>(detail::clamp_index(ty[y].first + k, in_h)) * out_w + x];
      out.at(y, x) = static_cast<float>(acc);
    }
  return out;
}

/// Crops `roi` and resamples it bicubically to the canonical 50x60 size,
/// clamping the result to [0, 1].
inline Image preprocess(const Image& raw, const Roi& roi, std::size_t out_h = kImageHeight,
                        std::size_t out_w = kImageWidth) {
  if (roi.height < 4 || roi.width < 4) throw ArgumentError("ROI extents must be >= 4 pixels");
  if (roi.top + roi.height > raw.height() || roi.left + roi.width > raw.width())
    throw ArgumentError("ROI exceeds the image bounds " + to_string(raw.pixels.shape()));
  Tensor crop({roi.height, roi.width});
  for (std::size_t y = 0; y < roi.height; ++y)
    for (std::size_t x = 0; x < roi.width; ++x) crop.at(y, x) = raw.pixels.at(roi.top + y, roi.left + x);
  Image out{resize_bicubic(crop, out_h, out_w), raw.provenance};
  for (float& v : out.pixels.values()) v = clamp01(v);
  return out;
}

}  // namespace utfe::data
