#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "utfe/nn/adam.hpp"
#include "utfe/nn/layers.hpp"

namespace utfe::nn {

/// One layer: its spec plus trainable state. Dense and conv layers hold
/// params {weights, biases}; every other kind holds none.
template <class T>
struct Layer {
  LayerSpec spec;
  std::vector<Param<T>> params;
};

/// Parameter shapes a spec requires (empty for parameter-free kinds).
inline std::vector<Shape> param_shapes(const LayerSpec& spec) {
  if (auto* d = std::get_if<DenseSpec>(&spec)) return {{d->out_units, d->in_units}, {d->out_units}};
  if (auto* c = std::get_if<Conv2dSpec>(&spec))
    return {{c->out_channels, c->in_channels, c->kernel_h, c->kernel_w}, {c->out_channels}};
  return {};
}

/// Zero-initialized layer state for a spec.
template <class T>
Layer<T> make_layer(LayerSpec spec) {
  Layer<T> layer{std::move(spec), {}};
  for (const Shape& s : param_shapes(layer.spec)) layer.params.emplace_back(zeros<T>(s));
  return layer;
}

/// A chain of layers run on batches [N, ...per-sample shape].
template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Shape input_shape, const std::vector<LayerSpec>& specs) : input_shape_(std::move(input_shape)) {
    for (const auto& s : specs) layers_.push_back(make_layer<T>(s));
    output_shape_ = check_chain(this->specs(), input_shape_);
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  /// He-uniform for layers feeding a ReLU (or nothing), Glorot-uniform for
  /// layers feeding a sigmoid; biases zero.
  void initialize(Rng& rng) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& layer = layers_[i];
      if (layer.params.empty()) continue;
      const Shape& ws = layer.params[0].value.shape();
      const std::size_t receptive = ws.size() == 4 ? ws[2] * ws[3] : 1;
      const double fan_in = static_cast<double>(ws[1] * receptive);
      const double fan_out = static_cast<double>(ws[0] * receptive);
      const bool feeds_sigmoid =
          i + 1 < layers_.size() && std::holds_alternative<SigmoidSpec>(layers_[i + 1].spec);
      const double limit =
          feeds_sigmoid ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
      layer.params[0] = Param<T>(uniform<T>(rng, ws, -limit, limit));
      layer.params[1] = Param<T>(zeros<T>(layer.params[1].value.shape()));
    }
  }

  /// Inference over a batch whose trailing axes equal input_shape().
  BasicTensor<T> predict(BasicTensor<T> x) const { return run(std::move(x), nullptr, nullptr); }

  /// Training forward: like predict(), but keeps what backward() needs.
  BasicTensor<T> forward(BasicTensor<T> x) {
    cache_.assign(layers_.size(), {});
    masks_.assign(layers_.size(), {});
    return run(std::move(x), &cache_, &masks_);
  }

  /// Backpropagates from the last forward(). Parameter
  /// gradients are added to Param::grad. Returns the input gradient, or an
  /// empty tensor when `need_input_grad` is false.
  BasicTensor<T> backward(BasicTensor<T> grad, bool need_input_grad = true) {
    if (cache_.size() != layers_.size()) throw Error("backward called without a cached forward pass");
    for (std::size_t k = layers_.size(); k-- > 0;) {
      Layer<T>& layer = layers_[k];
      const BasicTensor<T>& cached = cache_[k];
      const bool want_input = need_input_grad || k > 0;
      grad = std::visit(
          overloaded{
              [&](const DenseSpec&) {
                auto g = dense_backward(cached, layer.params[0].value, grad, want_input);
                accumulate(layer.params[0].grad, g.weights);
                accumulate(layer.params[1].grad, g.biases);
                return std::move(g.input);
              },
              [&](const Conv2dSpec&) {
                auto g = conv2d_backward(cached, layer.params[0].value, grad, want_input);
                accumulate(layer.params[0].grad, g.weights);
                accumulate(layer.params[1].grad, g.biases);
                return std::move(g.input);
              },
              [&](const MaxPool2dSpec&) { return maxpool2d_backward(masks_[k], grad); },
              [&](const Upsample2dSpec& s) { return upsample2d_backward(grad, s.factor_h, s.factor_w); },
              [&](const SigmoidSpec&) { return sigmoid_backward(cached, grad); },
              [&](const ReluSpec&) { return relu_backward(cached, grad); },
              [&](const FlattenSpec&) { return std::move(grad).reshaped(cached.shape()); },
              [&](const ReshapeSpec&) { return std::move(grad).reshaped(cached.shape()); },
          },
          layer.spec);
      if (!want_input) break;
    }
    cache_.clear();
    masks_.clear();
    return need_input_grad ? std::move(grad) : BasicTensor<T>{};
  }

  void zero_grad() {
    for (auto& l : layers_)
      for (auto& p : l.params) p.grad.fill(T{0});
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto& p : l.params) out.push_back(&p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      for (const auto& p : l.params) n += p.value.size();
    return n;
  }

 private:
  BasicTensor<T> run(BasicTensor<T> x, std::vector<BasicTensor<T>>* cache,
                     std::vector<PoolMask>* masks) const {
    const std::size_t batch = batch_of(x.shape(), input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer<T>& layer = layers_[i];
      BasicTensor<T> y = std::visit(
          overloaded{
              [&](const DenseSpec&) { return dense_forward(x, layer.params[0].value, layer.params[1].value); },
              [&](const Conv2dSpec&) { return conv2d_forward(x, layer.params[0].value, layer.params[1].value); },
              [&](const MaxPool2dSpec& s) {
                auto r = maxpool2d_forward(x, s.pool_h, s.pool_w);
                if (masks) (*masks)[i] = std::move(r.mask);
                return std::move(r.output);
              },
              [&](const Upsample2dSpec& s) { return upsample2d_forward(x, s.factor_h, s.factor_w); },
              [&](const SigmoidSpec&) { return sigmoid_forward(x); },
              [&](const ReluSpec&) { return relu_forward(x); },
              [&](const FlattenSpec&) { return with_batch(x, batch, Shape{shape_size(x.shape()) / batch}); },
              [&](const ReshapeSpec& s) { return with_batch(x, batch, s.target); },
          },
          layer.spec);
      if (cache) {
        // Sigmoid backward needs the output, everything else needs the input.
        (*cache)[i] = std::holds_alternative<SigmoidSpec>(layer.spec) ? y : std::move(x);
      }
      x = std::move(y);
    }
    return x;
  }

  static std::size_t batch_of(const Shape& x, const Shape& sample) {
    if (x.size() != sample.size() + 1 || !std::equal(sample.begin(), sample.end(), x.begin() + 1))
      throw ShapeError("batch " + to_string(x) + " does not match per-sample shape " + to_string(sample));
    return x[0];
  }
  static BasicTensor<T> with_batch(const BasicTensor<T>& x, std::size_t batch, const Shape& sample) {
    Shape s{batch};
    s.insert(s.end(), sample.begin(), sample.end());
    return x.reshaped(std::move(s));
  }
  static void accumulate(BasicTensor<T>& into, const BasicTensor<T>& g) {
    T* dst = into.data();
    const T* src = g.data();
    for (std::size_t i = 0; i < into.size(); ++i) dst[i] += src[i];
  }

  Shape input_shape_;
  Shape output_shape_;
  std::vector<Layer<T>> layers_;
  std::vector<BasicTensor<T>> cache_;
  std::vector<PoolMask> masks_;
};

}  // namespace utfe::nn
