#pragma once

#include "utfe/tensor.hpp"

namespace utfe::nn {

template <class T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;
};

/// Mean of squared differences over every element; grad = 2 (pred - target) / N.
template <class T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss shapes differ: " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  LossResult<T> result{0.0, BasicTensor<T>(pred.shape())};
  const double n = static_cast<double>(pred.size());
  const T scale = static_cast<T>(2.0 / n);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T diff = pred[i] - target[i];
    sum += static_cast<double>(diff) * static_cast<double>(diff);
    result.grad[i] = scale * diff;
  }
  result.loss = sum / n;
  return result;
}

}  // namespace utfe::nn
