#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "utfe/tensor.hpp"

namespace utfe::nn {

/// A trainable tensor with its gradient accumulator and Adam moments.
template <class T>
struct Param {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> m;
  BasicTensor<T> v;

  Param() = default;
  explicit Param(BasicTensor<T> init)
      : value(std::move(init)), grad(zeros_like(value)), m(zeros_like(value)), v(zeros_like(value)) {}
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ArgumentError("adam: learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ArgumentError("adam: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("adam: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ArgumentError("adam: epsilon must be > 0");
  }
};

/// Bias-corrected Adam update of one parameter at `config.step_count`
/// (already incremented for this step, so >= 1).
template <class T>
void adam_update(Param<T>& p, const AdamConfig& config) {
  if (config.step_count == 0) throw ArgumentError("adam: step_count must be >= 1 when updating");
  if (!all_finite(p.grad)) throw TrainingError("adam: non-finite gradient");
  const double t = static_cast<double>(config.step_count);
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(config.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(config.beta2, t)));
  const T lr = static_cast<T>(config.learning_rate), eps = static_cast<T>(config.epsilon);
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(p.value.size());
  Eigen::Map<const Array> g(p.grad.data(), n);
  Eigen::Map<Array> m(p.m.data(), n), v(p.v.data(), n), w(p.value.data(), n);
  m = b1 * m + (T{1} - b1) * g;
  v = b2 * v + (T{1} - b2) * g * g;
  w -= lr * (m * c1) / ((v * c2).sqrt() + eps);
}

/// Advances the step counter once, then updates every parameter.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamConfig& config) {
  config.validate();
  ++config.step_count;
  for (Param<T>* p : params) adam_update(*p, config);
}

}  // namespace utfe::nn
