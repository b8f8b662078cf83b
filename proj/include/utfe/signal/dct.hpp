#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "utfe/tensor.hpp"

namespace utfe::signal {

using FeatureVector = std::vector<float>;

/// Orthonormal DCT-II coefficients of an [H, W] image; (0, 0) is DC.
struct DctCoeffs {
  Tensor coeffs;
};

struct Block {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Orthonormal DCT-II basis for length n: row k, column j holds
/// a_k cos(pi (2j + 1) k / 2n), a_0 = sqrt(1/n), a_k = sqrt(2/n).
class DctBasis {
 public:
  explicit DctBasis(std::size_t n) : n_(n), m_(n * n) {
    const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
    const double scale = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        m_[k * n + j] = (k == 0 ? scale0 : scale) *
                        std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) /
                                 (2.0 * static_cast<double>(n)));
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t k, std::size_t j) const { return m_[k * n_ + j]; }

  /// Shared immutable basis for length n.
  static std::shared_ptr<const DctBasis> get(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::shared_ptr<const DctBasis>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const DctBasis>(n);
    return slot;
  }

 private:
  std::size_t n_;
  std::vector<double> m_;
};

namespace detail {

// out = A X B^T (forward) or A^T X B (inverse) in double precision.
inline Tensor separable(const Tensor& x, const DctBasis& rows, const DctBasis& cols, bool inverse) {
  const std::size_t h = x.extent(0), w = x.extent(1);
  std::vector<double> tmp(h * w, 0.0);
  // Along each row (width axis).
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t k = 0; k < w; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w; ++j)
        acc += (inverse ? cols(j, k) : cols(k, j)) * static_cast<double>(x.at(i, j));
      tmp[i * w + k] = acc;
    }
  // Along each column (height axis).
  Tensor out({h, w});
  std::vector<double> acc(w);
  for (std::size_t k = 0; k < h; ++k) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      const double c = inverse ? rows(i, k) : rows(k, i);
      for (std::size_t j = 0; j < w; ++j) acc[j] += c * tmp[i * w + j];
    }
    for (std::size_t j = 0; j < w; ++j) out.at(k, j) = static_cast<float>(acc[j]);
  }
  return out;
}

inline void require_image(const Tensor& x, const char* what) {
  if (x.rank() != 2) throw ShapeError(std::string(what) + " expects an [H, W] tensor, got " + to_string(x.shape()));
}

}  // namespace detail

/// Orthonormal 2D DCT-II, rows then columns.
inline DctCoeffs dct2(const Tensor& image) {
  detail::require_image(image, "dct2");
  const auto rows = DctBasis::get(image.extent(0));
  const auto cols = DctBasis::get(image.extent(1));
  return {detail::separable(image, *rows, *cols, false)};
}

/// Inverse of dct2 (orthonormal DCT-III).
inline Tensor idct2(const DctCoeffs& c) {
  detail::require_image(c.coeffs, "idct2");
  const auto rows = DctBasis::get(c.coeffs.extent(0));
  const auto cols = DctBasis::get(c.coeffs.extent(1));
  return detail::separable(c.coeffs, *rows, *cols, true);
}

/// Top-left block of coefficients, flattened row-major.
inline FeatureVector select_low_freq(const DctCoeffs& c, Block block) {
  detail::require_image(c.coeffs, "select_low_freq");
  const std::size_t h = c.coeffs.extent(0), w = c.coeffs.extent(1);
  if (block.height == 0 || block.width == 0 || block.height > h || block.width > w)
    throw ShapeError("low-frequency block (" + std::to_string(block.height) + "," +
                     std::to_string(block.width) + ") does not fit coefficient grid " +
                     to_string(c.coeffs.shape()));
  FeatureVector out;
  out.reserve(block.height * block.width);
  for (std::size_t i = 0; i < block.height; ++i)
    for (std::size_t j = 0; j < block.width; ++j) out.push_back(c.coeffs.at(i, j));
  return out;
}

/// Places a low-frequency block top-left in an otherwise zero grid.
inline DctCoeffs embed_low_freq(std::span<const float> features, Block block, Block target) {
  if (block.height == 0 || block.width == 0 || block.height > target.height ||
      block.width > target.width)
    throw ShapeError("low-frequency block does not fit the target grid");
  if (features.size() != block.height * block.width)
    throw ShapeError("feature length " + std::to_string(features.size()) + " does not match block " +
                     std::to_string(block.height) + "x" + std::to_string(block.width));
  DctCoeffs c{zeros({target.height, target.width})};
  for (std::size_t i = 0; i < block.height; ++i)
    for (std::size_t j = 0; j < block.width; ++j)
      c.coeffs.at(i, j) = features[i * block.width + j];
  return c;
}

}  // namespace utfe::signal
