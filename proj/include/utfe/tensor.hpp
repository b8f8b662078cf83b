#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "utfe/error.hpp"
#include "utfe/rng.hpp"

namespace utfe {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto extent : shape)
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
}

/// Allocator with a fixed 64-byte alignment. Vectorized reductions peel
/// elements up to an aligned address, so a fixed alignment keeps their
/// summation order, and therefore results, identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major N-dimensional array. Element (i, j) of an [H, W] tensor
/// lives at data()[i * W + j].
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, const std::vector<T>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_))
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                       to_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  const T& at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  /// Same data under a new shape of equal element count.
  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }
  void reshape(Shape shape) {
    check_shape(shape);
    if (shape_size(shape) != data_.size())
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <class U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

using Tensor = BasicTensor<float>;

template <class T = float>
BasicTensor<T> zeros(const Shape& shape) {
  return BasicTensor<T>(shape, T{0});
}

template <class T>
BasicTensor<T> zeros_like(const BasicTensor<T>& t) {
  return BasicTensor<T>(t.shape(), T{0});
}

enum class BinaryOp { add, sub, mul };

template <class T>
BasicTensor<T> map_binary(const BasicTensor<T>& a, const BasicTensor<T>& b, BinaryOp op) {
  if (a.shape() != b.shape())
    throw ShapeError("elementwise operands differ: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  BasicTensor<T> out(a.shape());
  const std::size_t n = a.size();
  switch (op) {
    case BinaryOp::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case BinaryOp::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    case BinaryOp::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
  }
  return out;
}

template <class T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, BinaryOp::add);
}
template <class T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, BinaryOp::sub);
}
template <class T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return map_binary(a, b, BinaryOp::mul);
}

/// i.i.d. Gaussian samples drawn in row-major order.
template <class T = float>
BasicTensor<T> normal(Rng& rng, const Shape& shape, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw ArgumentError("normal: standard deviation must be >= 0");
  BasicTensor<T> out(shape);
  for (auto& v : out.values()) v = static_cast<T>(mean + stddev * rng.gaussian());
  return out;
}

template <class T = float>
BasicTensor<T> uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  BasicTensor<T> out(shape);
  for (auto& v : out.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <class T>
bool all_finite(const BasicTensor<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

}  // namespace utfe
