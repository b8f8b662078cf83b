#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "utfe/data/noise.hpp"
#include "utfe/data/synthetic.hpp"
#include "utfe/signal/cw_ssim.hpp"
#include "utfe/signal/dct.hpp"
#include "utfe/signal/metrics.hpp"

using namespace utfe;
using namespace utfe::signal;

namespace {

std::vector<data::Image> corpus(std::size_t n, std::uint64_t seed = 3) {
  data::SynthConfig cfg;
  cfg.count = n;
  cfg.seed = seed;
  return data::generate_synthetic(cfg);
}

double energy(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += static_cast<double>(v) * v;
  return s;
}

Tensor low_pass(const Tensor& image, Block block) {
  const auto c = dct2(image);
  const auto f = select_low_freq(c, block);
  return idct2(embed_low_freq(f, block, {image.extent(0), image.extent(1)}));
}

// Smooth test pattern: a few low-frequency sinusoids.
Tensor smooth_image(std::size_t h, std::size_t w, double phase) {
  Tensor t({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      t.at(y, x) = static_cast<float>(0.5 + 0.2 * std::sin(0.31 * x + 0.17 * y + phase) +
                                      0.15 * std::cos(0.23 * y - 0.11 * x + 2 * phase));
  return t;
}

}  // namespace

TEST(Dct, ConstantImageHasOnlyDc) {
  for (float c : {0.5f, 1.0f, 0.123f}) {
    const auto coeffs = dct2(Tensor({50, 60}, c)).coeffs;
    EXPECT_NEAR(coeffs.at(0, 0), c * std::sqrt(3000.0), 1e-5 * std::sqrt(3000.0));
    for (std::size_t i = 1; i < coeffs.size(); ++i) ASSERT_NEAR(coeffs[i], 0.0f, 1e-5);
  }
}

TEST(Dct, MatchesDirectDoubleSum) {
  Rng rng(1);
  const std::size_t h = 6, w = 7;
  const auto x = uniform(rng, {h, w}, 0.0, 1.0);
  const auto c = dct2(x).coeffs;
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t l = 0; l < w; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          s += x.at(i, j) * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * h)) *
               std::cos(std::numbers::pi * (2 * j + 1) * l / (2.0 * w));
      s *= (k ? std::sqrt(2.0 / h) : std::sqrt(1.0 / h)) * (l ? std::sqrt(2.0 / w) : std::sqrt(1.0 / w));
      EXPECT_NEAR(c.at(k, l), s, 1e-6);
    }
}

TEST(Dct, RoundTripAndParseval) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = uniform(rng, {50, 60}, 0.0, 1.0);
    const auto c = dct2(x);
    const auto back = idct2(c);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(back[i], x[i], 1e-5);
    EXPECT_NEAR(energy(c.coeffs) / energy(x), 1.0, 1e-4);
  }
}

TEST(Dct, InverseSpecialCases) {
  const auto blank = idct2({zeros({5, 4})});
  for (float v : blank.values()) EXPECT_EQ(v, 0.0f);
  Tensor dc({2, 2}, 0.0f);
  dc.at(0, 0) = 1.0f;
  const auto flat = idct2({dc});
  for (float v : flat.values()) EXPECT_NEAR(v, 0.5f, 1e-7);
}

TEST(Dct, BlockSelectionAndEmbedding) {
  const auto c = dct2(corpus(1)[0].pixels);
  EXPECT_EQ(select_low_freq(c, {5, 6}).size(), 30u);
  EXPECT_EQ(select_low_freq(c, {10, 6}).size(), 60u);
  EXPECT_THROW(select_low_freq(c, {51, 6}), ShapeError);

  const std::vector<float> f{1, 2, 3, 4, 5, 6};
  const auto e = embed_low_freq(f, {2, 3}, {4, 5});
  EXPECT_EQ(e.coeffs.at(1, 2), 6.0f);
  EXPECT_EQ(e.coeffs.at(2, 0), 0.0f);
  EXPECT_THROW(embed_low_freq(f, {2, 2}, {4, 5}), ShapeError);
  const auto empty = embed_low_freq(std::vector<float>(6, 0.0f), {2, 3}, {4, 5});
  for (float v : empty.coeffs.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Dct, FullBlockIsIdentityAndNestedBlocksNeverLoseAccuracy) {
  for (const auto& img : corpus(20)) {
    const Tensor& x = img.pixels;
    EXPECT_LT(mse(x, low_pass(x, {50, 60})), 1e-6);
    const double m56 = mse(x, low_pass(x, {5, 6})), m106 = mse(x, low_pass(x, {10, 6}));
    EXPECT_GE(m56 + 1e-9, m106);
    EXPECT_GE(m106 + 1e-9, mse(x, low_pass(x, {50, 60})));
  }
}

TEST(Mse, ScaleConventionAndBasicProperties) {
  EXPECT_DOUBLE_EQ(mse(zeros({50, 60}), Tensor({50, 60}, 1.0f)), 65025.0);
  Rng rng(3);
  const auto a = uniform(rng, {8, 9}, 0.0, 1.0), b = uniform(rng, {8, 9}, 0.0, 1.0);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(a, b), mse(b, a));
  EXPECT_GT(mse(a, b), 0.0);
  EXPECT_THROW(mse(a, zeros({9, 8})), ShapeError);
}

TEST(Gabor, KernelsAreZeroMeanAndMatchSpecifiedSupport) {
  for (const auto& f : gabor_bank({})) {
    const long r = static_cast<long>(f.half);
    EXPECT_EQ(f.half, static_cast<std::size_t>(std::ceil(4 * 0.56 * f.wavelength)));
    std::complex<double> sum = 0.0;
    for (long dy = -r; dy <= r; ++dy)
      for (long dx = -r; dx <= r; ++dx) sum += f.at(dy, dx);
    EXPECT_LT(std::abs(sum), 1e-12);
  }
  EXPECT_EQ(gabor_bank({}).size(), 8u);
}

TEST(Cwt, SeparableFilteringMatchesDirectTwoDimensionalCorrelation) {
  Rng rng(4);
  const auto x = uniform(rng, {40, 45}, 0.0, 1.0);
  for (const auto& f : gabor_bank({})) {
    const Subband s = apply_filter(x, f);
    const long r = static_cast<long>(f.half);
    for (std::size_t y = 0; y < 40; y += 7)
      for (std::size_t xx = 0; xx < 45; xx += 5) {
        std::complex<double> acc = 0.0;
        for (long dy = -r; dy <= r; ++dy)
          for (long dx = -r; dx <= r; ++dx) {
            const long iy = static_cast<long>(y) + dy, ix = static_cast<long>(xx) + dx;
            if (iy < 0 || ix < 0 || iy >= 40 || ix >= 45) continue;
            acc += f.at(dy, dx) * static_cast<double>(x.at(iy, ix));
          }
        ASSERT_LT(std::abs(acc - s.at(y, xx)), 1e-10);
      }
  }
}

TEST(Cwt, ConstantImageGivesNoInteriorResponse) {
  for (const auto& s : cwt(Tensor({50, 60}, 0.8f))) {
    EXPECT_EQ(s.height, 50u);
    EXPECT_EQ(s.width, 60u);
    for (std::size_t y = s.border; y + s.border < s.height; ++y)
      for (std::size_t x = s.border; x + s.border < s.width; ++x) ASSERT_LT(std::abs(s.at(y, x)), 1e-3);
  }
}

TEST(Cwt, IsLinear) {
  const auto x = corpus(1)[0].pixels;
  Tensor scaled = x;
  for (auto& v : scaled.values()) v *= 0.5f;
  const auto a = cwt(x), b = cwt(scaled);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].coeffs.size(); ++i)
      ASSERT_LT(std::abs(0.5 * a[k].coeffs[i] - b[k].coeffs[i]), 1e-6);
}

TEST(Cwt, OnePixelShiftRoughlyPreservesInteriorMagnitudes) {
  const auto x = smooth_image(50, 61, 0.3);
  Tensor left({50, 60}), right({50, 60});
  for (std::size_t y = 0; y < 50; ++y)
    for (std::size_t c = 0; c < 60; ++c) {
      left.at(y, c) = x.at(y, c);
      right.at(y, c) = x.at(y, c + 1);
    }
  const auto a = cwt(left), b = cwt(right);
  std::vector<double> changes;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t y = a[k].border; y + a[k].border < 50; ++y)
      for (std::size_t c = a[k].border; c + a[k].border + 1 < 60; ++c) {
        const double ma = std::abs(a[k].at(y, c)), mb = std::abs(b[k].at(y, c));
        if (ma > 1e-6) changes.push_back(std::abs(ma - mb) / ma);
      }
  ASSERT_FALSE(changes.empty());
  std::nth_element(changes.begin(), changes.begin() + changes.size() / 2, changes.end());
  EXPECT_LT(changes[changes.size() / 2], 0.05);
}

TEST(CwSsim, IdentitySymmetryAndRange) {
  const auto images = corpus(10);
  Rng rng(5);
  for (const auto& img : images) {
    const Tensor& x = img.pixels;
    EXPECT_NEAR(cw_ssim(x, x), 1.0, 1e-6);
    const auto y = data::corrupt(x, 0.3, rng);
    const double s = cw_ssim(x, y);
    EXPECT_NEAR(s, cw_ssim(y, x), 1e-6);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(CwSsim, NonIncreasingUnderGrowingSpeckle) {
  const auto images = corpus(20, 8);
  double previous = 1.0;
  for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
    double total = 0.0;
    for (std::size_t t = 0; t < images.size(); ++t) {
      Rng rng(derive_seed(100, t));
      total += cw_ssim(images[t].pixels, data::corrupt(images[t].pixels, sigma, rng));
    }
    const double mean = total / static_cast<double>(images.size());
    EXPECT_LE(mean, previous);
    previous = mean;
  }
}

// Zero-mean analysis kernels see 1 - x as -x, and the window score depends
// only on |sum a conj(b)|, so intensity inversion cannot lower the score.
TEST(CwSsim, IntensityInversionLeavesScoreUnchanged) {
  const auto x = corpus(1)[0].pixels;
  Tensor inv(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) inv[i] = 1.0f - x[i];
  EXPECT_NEAR(cw_ssim(x, inv), 1.0, 1e-6);
}

TEST(CwSsim, RejectsMismatchedAndTooSmallImages) {
  EXPECT_THROW(cw_ssim(zeros({50, 60}), zeros({60, 50})), ShapeError);
  EXPECT_THROW(cw_ssim(zeros({20, 20}), zeros({20, 20})), ShapeError);
  CwSsimConfig bad;
  bad.window = 4;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = {};
  bad.wavelengths = {2.0};
  EXPECT_THROW(bad.validate(), ArgumentError);
}
