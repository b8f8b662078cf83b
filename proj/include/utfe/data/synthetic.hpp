#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "utfe/data/image.hpp"

namespace utfe::data {

struct Range {
  double low = 0.0;
  double high = 0.0;
  double mid() const { return 0.5 * (low + high); }
  double half() const { return 0.5 * (high - low); }
};

/// Parameters of the synthetic tongue-ultrasound corpus.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t count = 2000;
  std::size_t height = kImageHeight;
  std::size_t width = kImageWidth;
  Range curvature{0.004, 0.018};   // parabola coefficient, 1/pixel
  Range band_width{1.2, 2.6};      // Gaussian sigma of the bright surface band, pixels
  Range apex_row{14.0, 30.0};      // vertical position of the tongue dorsum
  Range apex_col{22.0, 38.0};
  Range brightness{0.75, 0.98};    // peak band intensity
  double speckle = 0.35;           // multiplicative texture strength
  bool fan_mask = true;

  void validate() const {
    if (count < 1) throw ArgumentError("synthetic corpus needs count >= 1");
    if (height < 8 || width < 8) throw ArgumentError("synthetic images must be at least 8x8");
    for (const Range* r : {&curvature, &band_width, &apex_row, &apex_col, &brightness})
      if (!(r->low <= r->high)) throw ArgumentError("synthetic parameter range has low > high");
    if (!(band_width.low > 0.0)) throw ArgumentError("band width must be positive");
    if (!(speckle >= 0.0)) throw ArgumentError("speckle strength must be >= 0");
  }
};

/// Seed of image `index`'s speckle texture.
inline std::uint64_t synthetic_image_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, index);
}

namespace detail {

// A parameter drifting smoothly with frame index: two incommensurate
// sinusoids spanning the configured range.
struct Drift {
  double w1, w2, p1, p2;
  Drift(Rng& rng)
      : w1(2.0 * std::numbers::pi / rng.uniform(18.0, 70.0)),
        w2(2.0 * std::numbers::pi / rng.uniform(7.0, 25.0)),
        p1(rng.uniform(0.0, 2.0 * std::numbers::pi)),
        p2(rng.uniform(0.0, 2.0 * std::numbers::pi)) {}
  double at(const Range& r, std::size_t frame) const {
    const double t = static_cast<double>(frame);
    return r.mid() + r.half() * (0.65 * std::sin(w1 * t + p1) + 0.35 * std::sin(w2 * t + p2));
  }
};

}  // namespace detail

/// Dark background, bright curved surface band with a Gaussian cross-section,
/// multiplicative speckle, optional fan-shaped field of view. Arc parameters
/// drift smoothly from one image to the next.
inline std::vector<Image> generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng corpus(derive_seed(config.seed, ~std::uint64_t{0}));
  const detail::Drift curv(corpus), width(corpus), row(corpus), col(corpus), bright(corpus), tilt(corpus);

  const std::size_t h = config.height, w = config.width;
  const double hh = static_cast<double>(h), ww = static_cast<double>(w);
  const double scale_r = hh / static_cast<double>(kImageHeight);
  const double scale_c = ww / static_cast<double>(kImageWidth);
  // Fan apex sits above the frame; rays within +-half_angle of vertical are visible.
  const double fan_x = 0.5 * ww, fan_y = -0.45 * hh, half_angle = 50.0 * std::numbers::pi / 180.0;

  std::vector<Image> images;
  images.reserve(config.count);
  std::vector<double> grain((h + 1) * (w + 1));
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng(synthetic_image_seed(config.seed, i));
    const double c = curv.at(config.curvature, i) / scale_c;
    const double sigma = width.at(config.band_width, i) * scale_r;
    const double apex_y = row.at(config.apex_row, i) * scale_r;
    const double apex_x = col.at(config.apex_col, i) * scale_c;
    const double peak = bright.at(config.brightness, i);
    const double skew = tilt.at(Range{-1.0, 1.0}, i) * 0.0004 / (scale_c * scale_c);

    for (double& g : grain) g = rng.gaussian();
    Image img{Tensor({h, w}), Provenance::synthetic};
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y);
        const double dx = fx - apex_x;
        const double surface = apex_y + c * dx * dx + skew * dx * dx * dx;
        const double d = fy - surface;
        double v = 0.05 + 0.05 * fy / hh;
        if (d > 0.0) v += 0.07 * std::exp(-d / (6.0 * scale_r));
        v += peak * std::exp(-d * d / (2.0 * sigma * sigma));
        // 2x2 averaged grain has variance 1/4; rescale to unit variance.
        const double n = 0.5 * (grain[y * (w + 1) + x] + grain[y * (w + 1) + x + 1] +
                                grain[(y + 1) * (w + 1) + x] + grain[(y + 1) * (w + 1) + x + 1]);
        v *= std::max(0.0, 1.0 + config.speckle * n);
        if (config.fan_mask) {
          const double angle = std::atan2(fx - fan_x, fy - fan_y);
          if (std::abs(angle) > half_angle) v = 0.0;
        }
        img.pixels.at(y, x) = clamp01(static_cast<float>(v));
      }
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace utfe::data
