#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "utfe/tensor.hpp"

namespace utfe::nn {

/// How a convolution is lowered onto matrix products. All three produce the
/// same result up to summation order; `automatic` picks by channel counts.
enum class ConvAlgo {
  automatic,
  im2col,           // one GEMM over an unrolled patch matrix; best for few input channels
  per_offset,       // one small GEMM per kernel tap over a padded input; no unrolling
  expanded_output,  // one GEMM to per-tap partial outputs, then shifted sums; few output channels
};

/// Gradients of a 2D convolution. `input` is empty when not requested.
template <class T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> biases;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// "same" zero padding with stride 1; for even kernels the extra row/column
// of padding goes at the bottom/right.
struct ConvGeometry {
  std::size_t cin, cout, h, w, kh, kw;
  std::size_t pad_top() const { return (kh - 1) / 2; }
  std::size_t pad_left() const { return (kw - 1) / 2; }
  std::size_t hp() const { return h + kh - 1; }
  std::size_t wp() const { return w + kw - 1; }
  std::size_t taps() const { return kh * kw; }
  std::size_t pixels() const { return h * w; }
};

inline ConvAlgo resolve(ConvAlgo algo, const ConvGeometry& g) {
  if (algo != ConvAlgo::automatic) return algo;
  if (g.cin <= 4) return ConvAlgo::im2col;
  if (g.cout <= 4) return ConvAlgo::expanded_output;
  return ConvAlgo::per_offset;
}

// Zero-padded copy of one sample as [cin x (hp*wp + extra)].
template <class T>
RowMat<T> pad_sample(const T* in, const ConvGeometry& g, std::size_t extra) {
  RowMat<T> p = RowMat<T>::Zero(g.cin, g.hp() * g.wp() + extra);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t y = 0; y < g.h; ++y) {
      const T* src = in + (c * g.h + y) * g.w;
      T* dst = &p(c, (y + g.pad_top()) * g.wp() + g.pad_left());
      std::copy(src, src + g.w, dst);
    }
  return p;
}

// Patch matrix [(cin*taps) x pixels]; row c*taps + dy*kw + dx.
template <class T>
void im2col(const T* in, const ConvGeometry& g, RowMat<T>& cols) {
  cols.resize(g.cin * g.taps(), g.pixels());
  const long pt = static_cast<long>(g.pad_top()), pl = static_cast<long>(g.pad_left());
  const long h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t dy = 0; dy < g.kh; ++dy)
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        T* row = &cols((c * g.kh + dy) * g.kw + dx, 0);
        const T* src = in + c * g.pixels();
        const long sx0 = static_cast<long>(dx) - pl;
        for (long y = 0; y < h; ++y) {
          T* d = row + y * w;
          const long sy = y + static_cast<long>(dy) - pt;
          if (sy < 0 || sy >= h) {
            std::fill(d, d + w, T{0});
            continue;
          }
          const T* s = src + sy * w;
          const long x0 = std::max(0L, -sx0), x1 = std::min(w, w - sx0);
          std::fill(d, d + x0, T{0});
          std::copy(s + x0 + sx0, s + x1 + sx0, d + x0);
          std::fill(d + x1, d + w, T{0});
        }
      }
}

template <class T>
void col2im_add(const RowMat<T>& cols, const ConvGeometry& g, T* grad_in) {
  const long pt = static_cast<long>(g.pad_top()), pl = static_cast<long>(g.pad_left());
  const long h = static_cast<long>(g.h), w = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t dy = 0; dy < g.kh; ++dy)
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        const T* row = &cols((c * g.kh + dy) * g.kw + dx, 0);
        T* dst = grad_in + c * g.pixels();
        const long sx0 = static_cast<long>(dx) - pl;
        for (long y = 0; y < h; ++y) {
          const long sy = y + static_cast<long>(dy) - pt;
          if (sy < 0 || sy >= h) continue;
          const T* s = row + y * w;
          T* d = dst + sy * w + sx0;
          const long x0 = std::max(0L, -sx0), x1 = std::min(w, w - sx0);
          for (long x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
}

// Weights [cout, cin, kh, kw] regrouped as [(taps*cout) x cin], tap-major.
template <class T>
RowMat<T> taps_major(const T* weights, const ConvGeometry& g) {
  RowMat<T> wr(g.taps() * g.cout, g.cin);
  for (std::size_t o = 0; o < g.cout; ++o)
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t t = 0; t < g.taps(); ++t)
        wr(t * g.cout + o, c) = weights[(o * g.cin + c) * g.taps() + t];
  return wr;
}

template <class T>
void add_taps_major(const RowMat<T>& wr, const ConvGeometry& g, T* weights) {
  for (std::size_t o = 0; o < g.cout; ++o)
    for (std::size_t c = 0; c < g.cin; ++c)
      for (std::size_t t = 0; t < g.taps(); ++t)
        weights[(o * g.cin + c) * g.taps() + t] += wr(t * g.cout + o, c);
}

inline ConvGeometry geometry(const Shape& input, const Shape& weights) {
  if (weights.size() != 4) throw ShapeError("conv2d weights must be [out_c, in_c, kh, kw]");
  const std::size_t r = input.size();
  if (r != 3 && r != 4) throw ShapeError("conv2d input must be [C,H,W] or [N,C,H,W]");
  ConvGeometry g{input[r - 3], weights[0], input[r - 2], input[r - 1], weights[2], weights[3]};
  if (g.cin != weights[1])
    throw ShapeError("conv2d input has " + std::to_string(g.cin) + " channels, weights expect " +
                     std::to_string(weights[1]));
  return g;
}

}  // namespace detail

/// Stride-1 "same" cross-correlation. Input [C_in,H,W] or a batch
/// [N,C_in,H,W]; weights [C_out,C_in,kh,kw]; biases [C_out].
template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& biases, ConvAlgo algo = ConvAlgo::automatic) {
  using namespace detail;
  const ConvGeometry g = geometry(input.shape(), weights.shape());
  if (biases.shape() != Shape{g.cout}) throw ShapeError("conv2d biases must be [out_c]");
  const std::size_t batch = input.rank() == 4 ? input.extent(0) : 1;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 3] = g.cout;
  BasicTensor<T> out(out_shape);

  const std::size_t in_stride = g.cin * g.pixels(), out_stride = g.cout * g.pixels();
  const ConvAlgo chosen = resolve(algo, g);
  const std::size_t wp = g.wp();
  RowMat<T> wr;
  if (chosen != ConvAlgo::im2col) wr = taps_major(weights.data(), g);
  ConstMatMap<T> wmat(weights.data(), g.cout, g.cin * g.taps());
  RowMat<T> work;

  for (std::size_t n = 0; n < batch; ++n) {
    const T* in = input.data() + n * in_stride;
    MatMap<T> dst(out.data() + n * out_stride, g.cout, g.pixels());
    switch (chosen) {
      case ConvAlgo::im2col: {
        im2col(in, g, work);
        dst.noalias() = wmat * work;
        break;
      }
      case ConvAlgo::per_offset: {
        const RowMat<T> padded = pad_sample(in, g, g.kw - 1);
        const std::size_t span = g.h * wp;
        work.setZero(g.cout, span);
        for (std::size_t dy = 0; dy < g.kh; ++dy)
          for (std::size_t dx = 0; dx < g.kw; ++dx) {
            const std::size_t t = dy * g.kw + dx;
            work.noalias() += wr.middleRows(t * g.cout, g.cout) * padded.middleCols(dy * wp + dx, span);
          }
        for (std::size_t o = 0; o < g.cout; ++o)
          for (std::size_t y = 0; y < g.h; ++y)
            for (std::size_t x = 0; x < g.w; ++x) dst(o, y * g.w + x) = work(o, y * wp + x);
        break;
      }
      case ConvAlgo::expanded_output:
      case ConvAlgo::automatic: {
        const RowMat<T> padded = pad_sample(in, g, 0);
        work.noalias() = wr * padded;
        dst.setZero();
        for (std::size_t t = 0; t < g.taps(); ++t) {
          const std::size_t dy = t / g.kw, dx = t % g.kw;
          for (std::size_t o = 0; o < g.cout; ++o) {
            const T* src = &work(t * g.cout + o, 0);
            T* d = &dst(o, 0);
            for (std::size_t y = 0; y < g.h; ++y) {
              const T* s = src + (y + dy) * wp + dx;
              T* dd = d + y * g.w;
              for (std::size_t x = 0; x < g.w; ++x) dd[x] += s[x];
            }
          }
        }
        break;
      }
    }
    for (std::size_t o = 0; o < g.cout; ++o) dst.row(o).array() += biases[o];
  }
  return out;
}

/// Exact gradients of conv2d_forward. Weight and bias gradients are summed
/// over the batch in sample order.
template <class T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& grad_out, bool need_input_grad = true,
                               ConvAlgo algo = ConvAlgo::automatic) {
  using namespace detail;
  const ConvGeometry g = geometry(input.shape(), weights.shape());
  Shape expected = input.shape();
  expected[expected.size() - 3] = g.cout;
  if (grad_out.shape() != expected)
    throw ShapeError("conv2d grad_out " + to_string(grad_out.shape()) + " expected " +
                     to_string(expected));
  const std::size_t batch = input.rank() == 4 ? input.extent(0) : 1;

  Conv2dGrads<T> grads{need_input_grad ? zeros_like(input) : BasicTensor<T>{},
                       zeros_like(weights), zeros<T>({g.cout})};
  const std::size_t in_stride = g.cin * g.pixels(), out_stride = g.cout * g.pixels();
  const ConvAlgo chosen = resolve(algo, g);
  const std::size_t wp = g.wp(), hp = g.hp();

  RowMat<T> wr, gwr;
  if (chosen != ConvAlgo::im2col) {
    wr = taps_major(weights.data(), g);
    gwr = RowMat<T>::Zero(wr.rows(), wr.cols());
  }
  ConstMatMap<T> wmat(weights.data(), g.cout, g.cin * g.taps());
  MatMap<T> gw(grads.weights.data(), g.cout, g.cin * g.taps());
  RowMat<T> cols, gcols, padded_grad;

  for (std::size_t n = 0; n < batch; ++n) {
    const T* in = input.data() + n * in_stride;
    ConstMatMap<T> go(grad_out.data() + n * out_stride, g.cout, g.pixels());
    for (std::size_t o = 0; o < g.cout; ++o) grads.biases[o] += go.row(o).sum();
    T* gin = need_input_grad ? grads.input.data() + n * in_stride : nullptr;

    switch (chosen) {
      case ConvAlgo::im2col: {
        im2col(in, g, cols);
        gw.noalias() += go * cols.transpose();
        if (gin) {
          gcols.noalias() = wmat.transpose() * go;
          col2im_add(gcols, g, gin);
        }
        break;
      }
      case ConvAlgo::per_offset: {
        const RowMat<T> padded = pad_sample(in, g, g.kw - 1);
        const std::size_t span = g.h * wp;
        // grad_out laid out on the padded row pitch; columns x >= w stay zero.
        padded_grad.setZero(g.cout, span);
        for (std::size_t o = 0; o < g.cout; ++o)
          for (std::size_t y = 0; y < g.h; ++y)
            for (std::size_t x = 0; x < g.w; ++x) padded_grad(o, y * wp + x) = go(o, y * g.w + x);
        RowMat<T> gpad;
        if (gin) gpad.setZero(g.cin, padded.cols());
        for (std::size_t dy = 0; dy < g.kh; ++dy)
          for (std::size_t dx = 0; dx < g.kw; ++dx) {
            const std::size_t t = dy * g.kw + dx, offset = dy * wp + dx;
            gwr.middleRows(t * g.cout, g.cout).noalias() +=
                padded_grad * padded.middleCols(offset, span).transpose();
            if (gin)
              gpad.middleCols(offset, span).noalias() +=
                  wr.middleRows(t * g.cout, g.cout).transpose() * padded_grad;
          }
        if (gin)
          for (std::size_t c = 0; c < g.cin; ++c)
            for (std::size_t y = 0; y < g.h; ++y)
              for (std::size_t x = 0; x < g.w; ++x)
                gin[(c * g.h + y) * g.w + x] += gpad(c, (y + g.pad_top()) * wp + x + g.pad_left());
        break;
      }
      case ConvAlgo::expanded_output:
      case ConvAlgo::automatic: {
        const RowMat<T> padded = pad_sample(in, g, 0);
        // Each tap's copy of grad_out, shifted to where that tap read the input.
        padded_grad.setZero(g.taps() * g.cout, hp * wp);
        for (std::size_t t = 0; t < g.taps(); ++t) {
          const std::size_t dy = t / g.kw, dx = t % g.kw;
          for (std::size_t o = 0; o < g.cout; ++o) {
            T* d = &padded_grad(t * g.cout + o, 0);
            for (std::size_t y = 0; y < g.h; ++y) {
              const T* s = go.data() + o * g.pixels() + y * g.w;
              std::copy(s, s + g.w, d + (y + dy) * wp + dx);
            }
          }
        }
        gwr.noalias() += padded_grad * padded.transpose();
        if (gin) {
          const RowMat<T> gpad = wr.transpose() * padded_grad;
          for (std::size_t c = 0; c < g.cin; ++c)
            for (std::size_t y = 0; y < g.h; ++y)
              for (std::size_t x = 0; x < g.w; ++x)
                gin[(c * g.h + y) * g.w + x] += gpad(c, (y + g.pad_top()) * wp + x + g.pad_left());
        }
        break;
      }
    }
  }
  if (chosen != ConvAlgo::im2col) add_taps_major(gwr, g, grads.weights.data());
  return grads;
}

}  // namespace utfe::nn
