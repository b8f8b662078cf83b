#pragma once

#include <cstdint>

#include "utfe/data/image.hpp"

namespace utfe::data {

/// Multiplicative speckle: y = clamp(x + x n, 0, 1), n ~ N(0, sigma^2).
struct NoiseConfig {
  double sigma = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma >= 0.0)) throw ArgumentError("speckle sigma must be >= 0");
  }
};

/// Draws one Gaussian per pixel from `rng` in row-major order.
inline Tensor corrupt(const Tensor& pixels, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ArgumentError("speckle sigma must be >= 0");
  Tensor out(pixels.shape());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float n = static_cast<float>(sigma * rng.gaussian());
    const float x = pixels[i];
    out[i] = clamp01(x + x * n);
  }
  return out;
}

inline Image corrupt(const Image& image, const NoiseConfig& noise) {
  noise.validate();
  Rng rng(noise.seed);
  return {corrupt(image.pixels, noise.sigma, rng), image.provenance};
}

}  // namespace utfe::data
