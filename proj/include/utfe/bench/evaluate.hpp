#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "utfe/data/noise.hpp"
#include "utfe/extractors/model.hpp"
#include "utfe/signal/cw_ssim.hpp"
#include "utfe/signal/metrics.hpp"

namespace utfe::bench {

struct ImageScore {
  double mse = 0.0;
  double cw_ssim = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(values.size()));
  return s;
}

struct Evaluation {
  std::vector<ImageScore> images;
  Summary mse;
  Summary cw_ssim;
};

/// Reconstruction quality of `model` on `images`. With `noise`, the model
/// sees corrupted inputs (one noise stream over the images in order) while
/// both metrics compare against the clean originals.
inline Evaluation evaluate(const extractors::ExtractorModel& model, std::span<const data::Image> images,
                           const std::optional<data::NoiseConfig>& noise = std::nullopt,
                           const signal::CwSsimConfig& cw = {}, std::size_t batch = 64) {
  if (noise) noise->validate();
  const std::size_t h = model.input_h, w = model.input_w, px = h * w;
  for (const auto& img : images)
    if (img.pixels.shape() != model.image_shape())
      throw ShapeError("image " + to_string(img.pixels.shape()) + " does not match model input " +
                       to_string(model.image_shape()));

  Rng rng(noise ? noise->seed : 0);
  Evaluation out;
  out.images.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t b = std::min(batch, images.size() - start);
    Tensor input({b, h, w});
    for (std::size_t k = 0; k < b; ++k) {
      const Tensor& clean = images[start + k].pixels;
      const Tensor fed = noise ? data::corrupt(clean, noise->sigma, rng) : clean;
      std::copy(fed.values().begin(), fed.values().end(), input.data() + k * px);
    }
    const Tensor recon = extractors::reconstruct_batch(model, extractors::encode_batch(model, input));
    for (std::size_t k = 0; k < b; ++k) {
      const Tensor r({h, w}, std::vector<float>(recon.data() + k * px, recon.data() + (k + 1) * px));
      const Tensor& clean = images[start + k].pixels;
      out.images.push_back({signal::mse(clean, r), signal::cw_ssim(clean, r, cw)});
    }
  }
  std::vector<double> m, c;
  for (const auto& s : out.images) {
    m.push_back(s.mse);
    c.push_back(s.cw_ssim);
  }
  out.mse = summarize(m);
  out.cw_ssim = summarize(c);
  return out;
}

}  // namespace utfe::bench
