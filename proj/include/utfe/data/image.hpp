#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "utfe/tensor.hpp"

namespace utfe::data {

/// Canonical training size (rows x columns).
inline constexpr std::size_t kImageHeight = 50;
inline constexpr std::size_t kImageWidth = 60;

enum class Provenance : std::uint8_t { file, synthetic };

/// Grayscale image, pixels in [0, 1].
struct Image {
  Tensor pixels;
  Provenance provenance = Provenance::file;

  std::size_t height() const { return pixels.extent(0); }
  std::size_t width() const { return pixels.extent(1); }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

/// Checks rank 2, finite, within [0, 1].
inline void validate(const Image& image) {
  if (image.pixels.rank() != 2) throw ShapeError("image must be [H, W], got " + to_string(image.pixels.shape()));
  for (float v : image.pixels.values())
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw ArgumentError("image pixel outside [0, 1]");
}

}  // namespace utfe::data
