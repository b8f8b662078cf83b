#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "utfe/rng.hpp"
#include "utfe/error.hpp"

namespace utfe::data {

/// Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

/// Seeded shuffle, then the first floor(n * fraction) items train.
template <class T>
Split<T> split(std::vector<T> items, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ArgumentError("train fraction must lie strictly between 0 and 1");
  Rng rng(seed);
  const auto order = shuffled_indices(items.size(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(items.size()) * train_fraction));
  Split<T> out;
  out.train.reserve(n_train);
  out.test.reserve(items.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < n_train ? out.train : out.test).push_back(std::move(items[order[k]]));
  return out;
}

}  // namespace utfe::data
