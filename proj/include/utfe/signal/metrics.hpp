#pragma once

#include "utfe/tensor.hpp"

namespace utfe::signal {

/// Pixel scale used when reporting MSE: [0, 1] pixels are compared on the
/// 8-bit [0, 255] scale.
inline constexpr double kMseScale = 255.0;

/// Mean squared pixel difference on the 8-bit scale.
inline double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mse shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (static_cast<double>(a[i]) - static_cast<double>(b[i])) * kMseScale;
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace utfe::signal
