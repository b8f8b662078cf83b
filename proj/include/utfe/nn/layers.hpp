#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "utfe/nn/conv.hpp"
#include "utfe/tensor.hpp"

namespace utfe::nn {

struct DenseSpec {
  std::size_t in_units = 1;
  std::size_t out_units = 1;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

/// Stride 1, zero padding "same".
struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  friend bool operator==(const Conv2dSpec&, const Conv2dSpec&) = default;
};

/// Disjoint windows; the window must tile the input exactly.
struct MaxPool2dSpec {
  std::size_t pool_h = 1;
  std::size_t pool_w = 1;
  friend bool operator==(const MaxPool2dSpec&, const MaxPool2dSpec&) = default;
};

/// Nearest-neighbour replication.
struct Upsample2dSpec {
  std::size_t factor_h = 1;
  std::size_t factor_w = 1;
  friend bool operator==(const Upsample2dSpec&, const Upsample2dSpec&) = default;
};

struct SigmoidSpec {
  friend bool operator==(const SigmoidSpec&, const SigmoidSpec&) = default;
};
struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};
struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct ReshapeSpec {
  Shape target;
  friend bool operator==(const ReshapeSpec&, const ReshapeSpec&) = default;
};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, MaxPool2dSpec, Upsample2dSpec, SigmoidSpec,
                               ReluSpec, FlattenSpec, ReshapeSpec>;

/// Stable numbering, used by the model file format.
enum class LayerKind : std::uint8_t {
  dense = 0,
  conv2d = 1,
  maxpool2d = 2,
  upsample2d = 3,
  sigmoid = 4,
  relu = 5,
  flatten = 6,
  reshape = 7,
};

inline LayerKind kind_of(const LayerSpec& spec) { return static_cast<LayerKind>(spec.index()); }

inline std::string name_of(LayerKind kind) {
  constexpr const char* names[] = {"dense", "conv2d",  "maxpool2d", "upsample2d",
                                   "sigmoid", "relu", "flatten",   "reshape"};
  return names[static_cast<std::size_t>(kind)];
}

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

/// Per-sample output shape of one layer; throws ShapeError when the layer
/// cannot accept `in`.
inline Shape output_shape(const LayerSpec& spec, const Shape& in) {
  check_shape(in);
  auto fail = [&](const std::string& why) -> Shape {
    throw ShapeError(name_of(kind_of(spec)) + " cannot take input " + to_string(in) + ": " + why);
  };
  return std::visit(
      overloaded{
          [&](const DenseSpec& s) -> Shape {
            if (s.in_units == 0 || s.out_units == 0) return fail("units must be >= 1");
            if (in != Shape{s.in_units}) return fail("expects [" + std::to_string(s.in_units) + "]");
            return {s.out_units};
          },
          [&](const Conv2dSpec& s) -> Shape {
            if (!s.in_channels || !s.out_channels || !s.kernel_h || !s.kernel_w)
              return fail("extents must be >= 1");
            if (in.size() != 3 || in[0] != s.in_channels)
              return fail("expects [" + std::to_string(s.in_channels) + ",H,W]");
            if (s.kernel_h > in[1] + s.kernel_h - 1 || s.kernel_w > in[2] + s.kernel_w - 1)
              return fail("kernel larger than padded input");
            return {s.out_channels, in[1], in[2]};
          },
          [&](const MaxPool2dSpec& s) -> Shape {
            if (!s.pool_h || !s.pool_w) return fail("pool extents must be >= 1");
            if (in.size() != 3) return fail("expects [C,H,W]");
            if (in[1] % s.pool_h || in[2] % s.pool_w) return fail("pool window does not tile input");
            return {in[0], in[1] / s.pool_h, in[2] / s.pool_w};
          },
          [&](const Upsample2dSpec& s) -> Shape {
            if (!s.factor_h || !s.factor_w) return fail("factors must be >= 1");
            if (in.size() != 3) return fail("expects [C,H,W]");
            return {in[0], in[1] * s.factor_h, in[2] * s.factor_w};
          },
          [&](const SigmoidSpec&) -> Shape { return in; },
          [&](const ReluSpec&) -> Shape { return in; },
          [&](const FlattenSpec&) -> Shape { return {shape_size(in)}; },
          [&](const ReshapeSpec& s) -> Shape {
            check_shape(s.target);
            if (shape_size(s.target) != shape_size(in)) return fail("element count differs");
            return s.target;
          },
      },
      spec);
}

/// Shape-check pass over a chain; returns the final per-sample shape.
template <class Range>
Shape check_chain(const Range& specs, Shape in) {
  for (const LayerSpec& spec : specs) in = output_shape(spec, in);
  return in;
}

// ---------------------------------------------------------------------------
// max pooling

/// Winning input index (flat, within the whole input tensor) for every
/// output cell. Ties go to the first maximal element in row-major order.
struct PoolMask {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::size_t> argmax;
};

template <class T>
struct PoolResult {
  BasicTensor<T> output;
  PoolMask mask;
};

/// Input [..., H, W] with any number of leading axes (channels, batch).
template <class T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& input, std::size_t pool_h, std::size_t pool_w) {
  if (input.rank() < 3) throw ShapeError("maxpool2d input must be [C,H,W] or [N,C,H,W]");
  if (!pool_h || !pool_w) throw ShapeError("maxpool2d pool extents must be >= 1");
  const std::size_t r = input.rank();
  const std::size_t h = input.extent(r - 2), w = input.extent(r - 1);
  if (h % pool_h || w % pool_w)
    throw ShapeError("maxpool2d window (" + std::to_string(pool_h) + "," + std::to_string(pool_w) +
                     ") does not tile " + to_string(input.shape()));
  const std::size_t oh = h / pool_h, ow = w / pool_w;
  const std::size_t planes = input.size() / (h * w);
  Shape out_shape = input.shape();
  out_shape[r - 2] = oh;
  out_shape[r - 1] = ow;

  PoolResult<T> result{BasicTensor<T>(out_shape), {input.shape(), out_shape, {}}};
  result.mask.argmax.resize(result.output.size());
  std::size_t k = 0;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++k) {
        std::size_t best = (p * h + oy * pool_h) * w + ox * pool_w;
        for (std::size_t dy = 0; dy < pool_h; ++dy)
          for (std::size_t dx = 0; dx < pool_w; ++dx) {
            const std::size_t idx = (p * h + oy * pool_h + dy) * w + ox * pool_w + dx;
            if (input[idx] > input[best]) best = idx;
          }
        result.output[k] = input[best];
        result.mask.argmax[k] = best;
      }
  return result;
}

template <class T>
BasicTensor<T> maxpool2d_backward(const PoolMask& mask, const BasicTensor<T>& grad_out) {
  if (grad_out.shape() != mask.output_shape || mask.argmax.size() != grad_out.size())
    throw ShapeError("maxpool2d grad_out " + to_string(grad_out.shape()) + " does not match mask " +
                     to_string(mask.output_shape));
  BasicTensor<T> grad_in(mask.input_shape, T{0});
  for (std::size_t k = 0; k < grad_out.size(); ++k) grad_in[mask.argmax[k]] += grad_out[k];
  return grad_in;
}

// ---------------------------------------------------------------------------
// nearest upsampling

template <class T>
BasicTensor<T> upsample2d_forward(const BasicTensor<T>& input, std::size_t factor_h,
                                  std::size_t factor_w) {
  if (input.rank() < 3) throw ShapeError("upsample2d input must be [C,H,W] or [N,C,H,W]");
  if (!factor_h || !factor_w) throw ShapeError("upsample2d factors must be >= 1");
  const std::size_t r = input.rank();
  const std::size_t h = input.extent(r - 2), w = input.extent(r - 1);
  const std::size_t oh = h * factor_h, ow = w * factor_w;
  Shape out_shape = input.shape();
  out_shape[r - 2] = oh;
  out_shape[r - 1] = ow;
  BasicTensor<T> out(out_shape);
  const std::size_t planes = input.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = input.data() + (p * h + y) * w;
      T* row = out.data() + (p * oh + y * factor_h) * ow;
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t f = 0; f < factor_w; ++f) row[x * factor_w + f] = src[x];
      for (std::size_t f = 1; f < factor_h; ++f) std::copy(row, row + ow, row + f * ow);
    }
  return out;
}

/// Adjoint of nearest upsampling: each input cell receives the sum of its
/// replicated window.
template <class T>
BasicTensor<T> upsample2d_backward(const BasicTensor<T>& grad_out, std::size_t factor_h,
                                   std::size_t factor_w) {
  if (grad_out.rank() < 3) throw ShapeError("upsample2d grad must be [C,H,W] or [N,C,H,W]");
  const std::size_t r = grad_out.rank();
  const std::size_t oh = grad_out.extent(r - 2), ow = grad_out.extent(r - 1);
  if (!factor_h || !factor_w || oh % factor_h || ow % factor_w)
    throw ShapeError("upsample2d grad extents are not multiples of the factors");
  const std::size_t h = oh / factor_h, w = ow / factor_w;
  Shape in_shape = grad_out.shape();
  in_shape[r - 2] = h;
  in_shape[r - 1] = w;
  BasicTensor<T> grad_in(in_shape, T{0});
  const std::size_t planes = grad_out.size() / (oh * ow);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y) {
      const T* src = grad_out.data() + (p * oh + y) * ow;
      T* dst = grad_in.data() + (p * h + y / factor_h) * w;
      for (std::size_t x = 0; x < w; ++x) {
        T s = dst[x];
        for (std::size_t f = 0; f < factor_w; ++f) s += src[x * factor_w + f];
        dst[x] = s;
      }
    }
  return grad_in;
}

// ---------------------------------------------------------------------------
// dense

template <class T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> biases;
};

namespace detail {
inline std::size_t dense_rows(const Shape& in, std::size_t units, const char* what) {
  if ((in.size() != 1 && in.size() != 2) || in.back() != units)
    throw ShapeError(std::string("dense ") + what + " " + to_string(in) + " expected [" +
                     std::to_string(units) + "] or [N," + std::to_string(units) + "]");
  return in.size() == 2 ? in[0] : 1;
}
}  // namespace detail

/// y = W x + b for x of shape [in] or a batch [N, in]; weights [out, in].
template <class T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& biases) {
  using namespace detail;
  if (weights.rank() != 2) throw ShapeError("dense weights must be [out, in]");
  const std::size_t out_units = weights.extent(0), in_units = weights.extent(1);
  if (biases.shape() != Shape{out_units}) throw ShapeError("dense biases must be [out]");
  const std::size_t rows = dense_rows(input.shape(), in_units, "input");
  Shape out_shape = input.shape();
  out_shape.back() = out_units;
  BasicTensor<T> out(out_shape);
  ConstMatMap<T> x(input.data(), rows, in_units);
  ConstMatMap<T> wm(weights.data(), out_units, in_units);
  MatMap<T> y(out.data(), rows, out_units);
  y.noalias() = x * wm.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(biases.data(), out_units);
  y.rowwise() += b;
  return out;
}

template <class T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out, bool need_input_grad = true) {
  using namespace detail;
  if (weights.rank() != 2) throw ShapeError("dense weights must be [out, in]");
  const std::size_t out_units = weights.extent(0), in_units = weights.extent(1);
  const std::size_t rows = dense_rows(input.shape(), in_units, "input");
  if (dense_rows(grad_out.shape(), out_units, "grad_out") != rows ||
      grad_out.rank() != input.rank())
    throw ShapeError("dense grad_out batch does not match input");
  DenseGrads<T> grads{need_input_grad ? zeros_like(input) : BasicTensor<T>{}, zeros_like(weights),
                      zeros<T>({out_units})};
  ConstMatMap<T> x(input.data(), rows, in_units);
  ConstMatMap<T> g(grad_out.data(), rows, out_units);
  MatMap<T>(grads.weights.data(), out_units, in_units).noalias() = g.transpose() * x;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads.biases.data(), out_units) =
      g.colwise().sum();
  if (need_input_grad)
    MatMap<T>(grads.input.data(), rows, in_units).noalias() =
        g * ConstMatMap<T>(weights.data(), out_units, in_units);
  return grads;
}

// ---------------------------------------------------------------------------
// activations

template <class T>
BasicTensor<T> sigmoid_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = T{1} / (T{1} + std::exp(-x[i]));
  return y;
}

/// Takes the forward output y; dy/dx = y (1 - y).
template <class T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
  if (output.shape() != grad_out.shape()) throw ShapeError("sigmoid grad shape mismatch");
  BasicTensor<T> g(output.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * output[i] * (T{1} - output[i]);
  return g;
}

template <class T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  const T* in = x.data();
  T* out = y.data();
  for (std::size_t i = 0, n = x.size(); i < n; ++i) out[i] = std::max(in[i], T{0});
  return y;
}

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  if (input.shape() != grad_out.shape()) throw ShapeError("relu grad shape mismatch");
  BasicTensor<T> g(input.shape());
  const T* in = input.data();
  const T* go = grad_out.data();
  T* out = g.data();
  for (std::size_t i = 0, n = g.size(); i < n; ++i) out[i] = in[i] > T{0} ? go[i] : T{0};
  return g;
}

}  // namespace utfe::nn
