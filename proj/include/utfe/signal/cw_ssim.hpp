#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "utfe/tensor.hpp"

namespace utfe::signal {

/// Complex-wavelet structural similarity parameters. The transform is a
/// flat bank of complex Gabor filters (one per wavelength x orientation)
/// rather than a steerable pyramid.
struct CwSsimConfig {
  std::size_t orientations = 4;
  std::vector<double> wavelengths{4.0, 8.0};
  std::size_t window = 7;
  double stabilizer = 0.01;

  void validate() const {
    if (orientations < 1) throw ArgumentError("cw_ssim: need at least one orientation");
    if (wavelengths.empty()) throw ArgumentError("cw_ssim: need at least one wavelength");
    for (double w : wavelengths)
      if (!(w > 2.0)) throw ArgumentError("cw_ssim: wavelengths must exceed 2 pixels");
    if (window < 3 || window % 2 == 0) throw ArgumentError("cw_ssim: window must be odd and >= 3");
    if (!(stabilizer > 0.0)) throw ArgumentError("cw_ssim: stabilizer must be > 0");
  }
};

/// Gaussian envelope width per wavelength (about one octave of bandwidth).
inline constexpr double kGaborSigmaPerWavelength = 0.56;
/// Kernel support is truncated at this many envelope sigmas.
inline constexpr double kGaborTruncation = 4.0;

/// One complex Gabor filter, stored separably as
///   k(y, x) = (row(x) col(y) - dc * env_row(x) env_col(y)) / norm
/// where `dc` removes the carrier's mean so the kernel sums to zero.
struct GaborFilter {
  double wavelength = 0.0;
  double orientation = 0.0;  // radians
  std::size_t half = 0;
  std::vector<std::complex<double>> carrier_x, carrier_y;
  std::vector<double> envelope;  // same 1D Gaussian for both axes
  std::complex<double> dc;
  double norm = 1.0;

  std::size_t size() const { return 2 * half + 1; }

  /// Dense 2D kernel value at offset (dy, dx) from the centre.
  std::complex<double> at(long dy, long dx) const {
    const std::size_t iy = static_cast<std::size_t>(dy + static_cast<long>(half));
    const std::size_t ix = static_cast<std::size_t>(dx + static_cast<long>(half));
    return (carrier_x[ix] * carrier_y[iy] - dc * envelope[ix] * envelope[iy]) / norm;
  }
};

inline GaborFilter make_gabor(double wavelength, double orientation) {
  GaborFilter f;
  f.wavelength = wavelength;
  f.orientation = orientation;
  const double sigma = kGaborSigmaPerWavelength * wavelength;
  f.half = static_cast<std::size_t>(std::ceil(kGaborTruncation * sigma));
  const double k = 2.0 * std::numbers::pi / wavelength;
  const double kx = k * std::cos(orientation), ky = k * std::sin(orientation);
  std::complex<double> sum_x = 0.0, sum_y = 0.0;
  double env_sum = 0.0;
  for (long t = -static_cast<long>(f.half); t <= static_cast<long>(f.half); ++t) {
    const double e = std::exp(-static_cast<double>(t * t) / (2.0 * sigma * sigma));
    f.envelope.push_back(e);
    f.carrier_x.push_back(e * std::polar(1.0, kx * static_cast<double>(t)));
    f.carrier_y.push_back(e * std::polar(1.0, ky * static_cast<double>(t)));
    sum_x += f.carrier_x.back();
    sum_y += f.carrier_y.back();
    env_sum += e;
  }
  f.dc = (sum_x * sum_y) / (env_sum * env_sum);
  f.norm = env_sum * env_sum;
  return f;
}

/// Filters of the bank in subband order: wavelength-major, then orientation
/// j * pi / orientations.
inline std::vector<GaborFilter> gabor_bank(const CwSsimConfig& config) {
  config.validate();
  std::vector<GaborFilter> bank;
  for (double wl : config.wavelengths)
    for (std::size_t j = 0; j < config.orientations; ++j)
      bank.push_back(make_gabor(wl, std::numbers::pi * static_cast<double>(j) /
                                        static_cast<double>(config.orientations)));
  return bank;
}

/// Complex coefficients of one subband, [height, width] row-major.
struct Subband {
  double wavelength = 0.0;
  double orientation = 0.0;
  std::size_t border = 0;  // rows/columns touched by zero padding
  std::size_t height = 0, width = 0;
  std::vector<std::complex<double>> coeffs;

  std::complex<double> at(std::size_t y, std::size_t x) const { return coeffs[y * width + x]; }
};

namespace detail {

// Zero-padded "same" separable filtering: along x with `fx`, then y with `fy`.
template <class FX, class FY>
std::vector<std::complex<double>> filter_separable(const Tensor& image, std::size_t half, FX fx, FY fy) {
  const long h = static_cast<long>(image.extent(0)), w = static_cast<long>(image.extent(1));
  const long r = static_cast<long>(half);
  std::vector<std::complex<double>> tmp(static_cast<std::size_t>(h * w));
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      std::complex<double> acc = 0.0;
      for (long t = std::max(-r, -x); t <= std::min(r, w - 1 - x); ++t)
        acc += fx(static_cast<std::size_t>(t + r)) * static_cast<double>(image.at(y, x + t));
      tmp[y * w + x] = acc;
    }
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h * w));
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      std::complex<double> acc = 0.0;
      for (long t = std::max(-r, -y); t <= std::min(r, h - 1 - y); ++t)
        acc += fy(static_cast<std::size_t>(t + r)) * tmp[(y + t) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Filters `image` with one Gabor kernel (cross-correlation, zero padding).
inline Subband apply_filter(const Tensor& image, const GaborFilter& f) {
  if (image.rank() != 2) throw ShapeError("cwt expects an [H, W] image");
  if (image.extent(0) < f.size() || image.extent(1) < f.size())
    throw ShapeError("image " + to_string(image.shape()) + " is smaller than the " +
                     std::to_string(f.size()) + "x" + std::to_string(f.size()) + " kernel support");
  Subband s{f.wavelength, f.orientation, f.half, image.extent(0), image.extent(1), {}};
  auto carrier = detail::filter_separable(
      image, f.half, [&](std::size_t i) { return f.carrier_x[i]; },
      [&](std::size_t i) { return f.carrier_y[i]; });
  auto envelope = detail::filter_separable(
      image, f.half, [&](std::size_t i) { return std::complex<double>(f.envelope[i]); },
      [&](std::size_t i) { return std::complex<double>(f.envelope[i]); });
  s.coeffs.resize(carrier.size());
  for (std::size_t i = 0; i < carrier.size(); ++i) s.coeffs[i] = (carrier[i] - f.dc * envelope[i]) / f.norm;
  return s;
}

/// Complex wavelet decomposition: one subband per wavelength x orientation.
inline std::vector<Subband> cwt(const Tensor& image, const CwSsimConfig& config = {}) {
  std::vector<Subband> bands;
  for (const auto& f : gabor_bank(config)) bands.push_back(apply_filter(image, f));
  return bands;
}

/// Local complex-wavelet similarity over one set of paired coefficients:
/// (2 |sum a conj(b)| + K) / (sum |a|^2 + sum |b|^2 + K).
inline double cw_ssim_window(std::span<const std::complex<double>> a,
                             std::span<const std::complex<double>> b, double stabilizer) {
  std::complex<double> cross = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cross += a[i] * std::conj(b[i]);
    energy += std::norm(a[i]) + std::norm(b[i]);
  }
  return (2.0 * std::abs(cross) + stabilizer) / (energy + stabilizer);
}

/// Mean over subbands of the mean over non-overlapping windows. Each
/// subband's border (kernel half-width) is trimmed first so no window sees
/// padding.
inline double cw_ssim(const Tensor& a, const Tensor& b, const CwSsimConfig& config = {}) {
  if (a.shape() != b.shape())
    throw ShapeError("cw_ssim shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  config.validate();
  const std::size_t win = config.window;
  double total = 0.0;
  std::size_t bands = 0;
  std::vector<std::complex<double>> wa, wb;
  for (const auto& f : gabor_bank(config)) {
    const Subband sa = apply_filter(a, f);
    const Subband sb = apply_filter(b, f);
    const std::size_t inner_h = sa.height - 2 * sa.border, inner_w = sa.width - 2 * sa.border;
    const std::size_t rows = inner_h / win, cols = inner_w / win;
    if (rows == 0 || cols == 0)
      throw ShapeError("image " + to_string(a.shape()) + " leaves no " + std::to_string(win) + "x" +
                       std::to_string(win) + " window inside the " + std::to_string(f.size()) +
                       "-pixel kernel border");
    double band_sum = 0.0;
    for (std::size_t wy = 0; wy < rows; ++wy)
      for (std::size_t wx = 0; wx < cols; ++wx) {
        wa.clear();
        wb.clear();
        for (std::size_t y = 0; y < win; ++y)
          for (std::size_t x = 0; x < win; ++x) {
            const std::size_t py = sa.border + wy * win + y, px = sa.border + wx * win + x;
            wa.push_back(sa.at(py, px));
            wb.push_back(sb.at(py, px));
          }
        band_sum += cw_ssim_window(wa, wb, config.stabilizer);
      }
    total += band_sum / static_cast<double>(rows * cols);
    ++bands;
  }
  return total / static_cast<double>(bands);
}

}  // namespace utfe::signal
