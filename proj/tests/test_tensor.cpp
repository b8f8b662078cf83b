#include <gtest/gtest.h>

#include <cmath>

#include "utfe/rng.hpp"
#include "utfe/tensor.hpp"

using namespace utfe;

TEST(Tensor, ZerosHasProductSizeAndZeroValues) {
  const auto t = zeros({2, 3});
  EXPECT_EQ(t.size(), 6u);
  for (float v : t.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(zeros({50, 60}).shape(), (Shape{50, 60}));
  EXPECT_EQ(zeros({1}).to_vector(), std::vector<float>{0.0f});
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(zeros({2, 3}).reshaped({4, 2}), ShapeError);
}

TEST(Tensor, ElementwiseOps) {
  const Tensor a({2}, std::vector<float>{1, 2}), b({2}, std::vector<float>{3, 4});
  EXPECT_EQ((a + b).to_vector(), (std::vector<float>{4, 6}));
  Rng rng(3);
  const auto x = normal(rng, {7, 5}, 0.0, 2.0);
  const auto product = x * zeros_like(x), difference = x - x;
  for (float v : product.values()) EXPECT_EQ(v, 0.0f);
  for (float v : difference.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(a + zeros({3}), ShapeError);
}

TEST(Tensor, AddIsCommutative) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = normal(rng, {13, 4}, 0.0, 10.0), b = normal(rng, {13, 4}, 0.0, 10.0);
    EXPECT_EQ(a + b, b + a);
    EXPECT_EQ(a * b, b * a);
  }
}

TEST(Tensor, RowMajorIndexRoundTrip) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng.below(20), w = 1 + rng.below(20), c = 1 + rng.below(4);
    Tensor t({h, w});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) ASSERT_EQ(t.at(i, j), static_cast<float>(i * w + j));
    Tensor u({c, h, w});
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = static_cast<float>(i);
    const auto flat = u.reshaped({c * h * w});
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) ASSERT_EQ(u.at(k, i, j), flat[(k * h + i) * w + j]);
  }
}

TEST(Rng, ZeroVarianceNormalIsMean) {
  Rng rng(7);
  EXPECT_EQ(normal(rng, {4}, 0.0, 0.0).to_vector(), std::vector<float>(4, 0.0f));
  EXPECT_THROW(normal(rng, {4}, 0.0, -1.0), ArgumentError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  Rng d(9), e(9);
  EXPECT_EQ(normal(d, {100}, 0.0, 1.0), normal(e, {100}, 0.0, 1.0));
}

TEST(Rng, GaussianMoments) {
  Rng rng(2024);
  const std::size_t n = 1'000'000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.01);
}

TEST(Rng, UniformStaysInRange) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Tensor, StorageIsSixtyFourByteAligned) {
  std::vector<Tensor> keep;
  for (std::size_t n : {1u, 3u, 17u, 1000u, 123457u}) {
    keep.emplace_back(Shape{n}, 1.0f);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(keep.back().data()) % 64, 0u);
    const auto copy = keep.back().reshaped({n, 1});
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(copy.data()) % 64, 0u);
  }
  const BasicTensor<double> d({5}, std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_EQ(reinterpret_cast<std::uintptr_t>(d.data()) % 64, 0u);
  EXPECT_EQ(d.to_vector(), (std::vector<double>{1, 2, 3, 4, 5}));
}
