#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "utfe/data/image.hpp"
#include "utfe/extractors/feature_size.hpp"
#include "utfe/nn/network.hpp"
#include "utfe/signal/dct.hpp"

namespace utfe::extractors {

using signal::FeatureVector;

enum class ExtractorKind : std::uint8_t { dct = 0, ae = 1, dae = 2, cae = 3, dcae = 4 };

inline std::string to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::dct: return "dct";
    case ExtractorKind::ae: return "ae";
    case ExtractorKind::dae: return "dae";
    case ExtractorKind::cae: return "cae";
    case ExtractorKind::dcae: return "dcae";
  }
  return "?";
}

using utfe::to_string;

inline std::optional<ExtractorKind> parse_kind(std::string_view name) {
  for (auto k : {ExtractorKind::dct, ExtractorKind::ae, ExtractorKind::dae, ExtractorKind::cae, ExtractorKind::dcae})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

inline bool is_denoising(ExtractorKind k) { return k == ExtractorKind::dae || k == ExtractorKind::dcae; }
inline bool is_convolutional(ExtractorKind k) { return k == ExtractorKind::cae || k == ExtractorKind::dcae; }
inline bool is_dense(ExtractorKind k) { return k == ExtractorKind::ae || k == ExtractorKind::dae; }

struct TrainingMeta {
  std::uint32_t epochs_run = 0;
  float final_loss = 0.0f;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

/// One of the five extractors. For the auto-encoder kinds the encoder maps
/// [1, H, W] to [C, h, w] and the decoder maps it back; the DCT kind has no
/// layers and is training-free.
struct ExtractorModel {
  ExtractorKind kind = ExtractorKind::dct;
  FeatureSize feature_size;
  std::size_t input_h = data::kImageHeight;
  std::size_t input_w = data::kImageWidth;
  nn::Sequential<float> encoder;
  nn::Sequential<float> decoder;
  TrainingMeta meta;

  Shape image_shape() const { return {input_h, input_w}; }
  Shape feature_shape() const {
    return {feature_size.channels(), feature_size.map_h(), feature_size.map_w()};
  }
};

// Seed streams derived from one user seed.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;

/// Checks the model-level invariants: encoder output equals the feature
/// geometry and decoder output equals the input shape.
inline void check_model(const ExtractorModel& m) {
  if (m.kind == ExtractorKind::dct) {
    if (!m.encoder.empty() || !m.decoder.empty()) throw ShapeError("DCT extractor must have no layers");
    if (m.feature_size.channels() != 1) throw ShapeError("DCT features have exactly one channel");
    if (m.feature_size.map_h() > m.input_h || m.feature_size.map_w() > m.input_w)
      throw ShapeError("DCT block " + m.feature_size.str() + " exceeds the input grid");
    return;
  }
  const Shape in{1, m.input_h, m.input_w};
  if (m.encoder.input_shape() != in) throw ShapeError("encoder input must be " + to_string(in));
  if (nn::check_chain(m.encoder.specs(), in) != m.feature_shape())
    throw ShapeError("encoder output does not match feature size " + m.feature_size.str());
  if (m.decoder.input_shape() != m.feature_shape()) throw ShapeError("decoder input must equal the feature shape");
  if (nn::check_chain(m.decoder.specs(), m.feature_shape()) != in)
    throw ShapeError("decoder output must be " + to_string(in));
}

inline ExtractorModel build_dct_extractor(FeatureSize fs, std::size_t input_h = data::kImageHeight,
                                          std::size_t input_w = data::kImageWidth) {
  ExtractorModel m;
  m.kind = ExtractorKind::dct;
  m.feature_size = fs;
  m.input_h = input_h;
  m.input_w = input_w;
  check_model(m);
  return m;
}

/// Encoder conv 8x8/32 + pool(2,2), conv 6x6/16 + pool(5,5), conv 4x4/C +
/// pool(1,1) maps 50x60 to C x (5, 6); the decoder mirrors it with nearest
/// upsampling and ends in a one-channel 8x8 conv + sigmoid. ReLU follows
/// every hidden conv.
inline ExtractorModel build_conv_autoencoder(FeatureSize fs, ExtractorKind kind = ExtractorKind::cae,
                                             std::uint64_t seed = 0, std::size_t input_h = data::kImageHeight,
                                             std::size_t input_w = data::kImageWidth) {
  using namespace nn;
  if (!is_convolutional(kind)) throw ArgumentError("build_conv_autoencoder needs kind cae or dcae");
  if (input_h != 50 || input_w != 60)
    throw ArgumentError("the convolutional pooling schedule is fixed for 50x60 inputs");
  if (fs.map_h() != 5 || fs.map_w() != 6 || fs.channels() < 1 || fs.channels() > 2)
    throw ArgumentError("convolutional auto-encoders support 1x(5,6) and 2x(5,6), got " + fs.str());
  const std::size_t c = fs.channels();
  ExtractorModel m;
  m.kind = kind;
  m.feature_size = fs;
  m.input_h = input_h;
  m.input_w = input_w;
  m.encoder = Sequential<float>({1, input_h, input_w},
                                {Conv2dSpec{1, 32, 8, 8}, ReluSpec{}, MaxPool2dSpec{2, 2},
                                 Conv2dSpec{32, 16, 6, 6}, ReluSpec{}, MaxPool2dSpec{5, 5},
                                 Conv2dSpec{16, c, 4, 4}, ReluSpec{}, MaxPool2dSpec{1, 1}});
  m.decoder = Sequential<float>(m.feature_shape(),
                                {Upsample2dSpec{1, 1}, Conv2dSpec{c, 16, 4, 4}, ReluSpec{},
                                 Upsample2dSpec{5, 5}, Conv2dSpec{16, 32, 6, 6}, ReluSpec{},
                                 Upsample2dSpec{2, 2}, Conv2dSpec{32, 1, 8, 8}, SigmoidSpec{}});
  Rng rng(derive_seed(seed, kInitStream));
  m.encoder.initialize(rng);
  m.decoder.initialize(rng);
  m.meta.seed = seed;
  check_model(m);
  return m;
}

/// Fully connected 3000-1000-500-250-K encoder and its mirror, ReLU hidden
/// units, sigmoid output. Features are reported as 1 x (K, 1).
inline ExtractorModel build_dense_autoencoder(std::size_t k, ExtractorKind kind = ExtractorKind::ae,
                                              std::uint64_t seed = 0, std::size_t input_h = data::kImageHeight,
                                              std::size_t input_w = data::kImageWidth) {
  using namespace nn;
  if (!is_dense(kind)) throw ArgumentError("build_dense_autoencoder needs kind ae or dae");
  if (k != 30 && k != 60) throw ArgumentError("dense auto-encoders support K = 30 or 60, got " + std::to_string(k));
  const std::size_t pixels = input_h * input_w;
  ExtractorModel m;
  m.kind = kind;
  m.feature_size = FeatureSize(1, k, 1);
  m.input_h = input_h;
  m.input_w = input_w;
  m.encoder = Sequential<float>({1, input_h, input_w},
                                {FlattenSpec{}, DenseSpec{pixels, 1000}, ReluSpec{}, DenseSpec{1000, 500},
                                 ReluSpec{}, DenseSpec{500, 250}, ReluSpec{}, DenseSpec{250, k}, ReluSpec{},
                                 ReshapeSpec{{1, k, 1}}});
  m.decoder = Sequential<float>(m.feature_shape(),
                                {FlattenSpec{}, DenseSpec{k, 250}, ReluSpec{}, DenseSpec{250, 500}, ReluSpec{},
                                 DenseSpec{500, 1000}, ReluSpec{}, DenseSpec{1000, pixels}, SigmoidSpec{},
                                 ReshapeSpec{{1, input_h, input_w}}});
  Rng rng(derive_seed(seed, kInitStream));
  m.encoder.initialize(rng);
  m.decoder.initialize(rng);
  m.meta.seed = seed;
  check_model(m);
  return m;
}

/// Builds the extractor of `kind` for a feature size, initialized from `seed`.
inline ExtractorModel build_extractor(ExtractorKind kind, FeatureSize fs, std::uint64_t seed = 0) {
  switch (kind) {
    case ExtractorKind::dct: return build_dct_extractor(fs);
    case ExtractorKind::ae:
    case ExtractorKind::dae:
      if (fs.channels() != 1 || fs.map_w() != 1)
        throw ArgumentError("dense auto-encoder features are written 1x(K,1), got " + fs.str());
      return build_dense_autoencoder(fs.map_h(), kind, seed);
    case ExtractorKind::cae:
    case ExtractorKind::dcae: return build_conv_autoencoder(fs, kind, seed);
  }
  throw ArgumentError("unknown extractor kind");
}

namespace detail {
inline void require_image(const ExtractorModel& m, const Tensor& image) {
  if (image.shape() != m.image_shape())
    throw ShapeError("image " + to_string(image.shape()) + " does not match model input " + to_string(m.image_shape()));
}
}  // namespace detail

/// Encodes a batch of images [N, H, W]; returns [N, K].
inline Tensor encode_batch(const ExtractorModel& m, const Tensor& images) {
  if (images.rank() != 3 || images.extent(1) != m.input_h || images.extent(2) != m.input_w)
    throw ShapeError("batch " + to_string(images.shape()) + " does not match model input " + to_string(m.image_shape()));
  const std::size_t n = images.extent(0), k = m.feature_size.length();
  if (m.kind == ExtractorKind::dct) {
    Tensor out({n, k});
    const std::size_t px = m.input_h * m.input_w;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor img({m.input_h, m.input_w}, std::vector<float>(images.data() + i * px, images.data() + (i + 1) * px));
      const auto f = signal::select_low_freq(signal::dct2(img), {m.feature_size.map_h(), m.feature_size.map_w()});
      std::copy(f.begin(), f.end(), out.data() + i * k);
    }
    return out;
  }
  return m.encoder.predict(images.reshaped({n, 1, m.input_h, m.input_w})).reshaped({n, k});
}

/// Reconstructs a batch of feature vectors [N, K]; returns [N, H, W] in [0, 1].
inline Tensor reconstruct_batch(const ExtractorModel& m, const Tensor& features) {
  const std::size_t k = m.feature_size.length();
  if (features.rank() != 2 || features.extent(1) != k)
    throw ShapeError("feature batch " + to_string(features.shape()) + " expected [N," + std::to_string(k) + "]");
  const std::size_t n = features.extent(0);
  if (m.kind == ExtractorKind::dct) {
    Tensor out({n, m.input_h, m.input_w});
    const std::size_t px = m.input_h * m.input_w;
    for (std::size_t i = 0; i < n; ++i) {
      const auto coeffs = signal::embed_low_freq(std::span(features.data() + i * k, k),
                                                 {m.feature_size.map_h(), m.feature_size.map_w()},
                                                 {m.input_h, m.input_w});
      const Tensor img = signal::idct2(coeffs);
      for (std::size_t p = 0; p < px; ++p) out[i * px + p] = data::clamp01(img[p]);
    }
    return out;
  }
  Shape fshape{n};
  for (auto e : m.feature_shape()) fshape.push_back(e);
  return m.decoder.predict(features.reshaped(fshape)).reshaped({n, m.input_h, m.input_w});
}

/// Feature vector of one image, length C*h*w.
inline FeatureVector encode(const ExtractorModel& m, const Tensor& image) {
  detail::require_image(m, image);
  return encode_batch(m, image.reshaped({1, m.input_h, m.input_w})).to_vector();
}

/// Image rebuilt from a feature vector.
inline Tensor reconstruct(const ExtractorModel& m, std::span<const float> features) {
  if (features.size() != m.feature_size.length())
    throw ShapeError("feature vector has length " + std::to_string(features.size()) + ", model expects K=" +
                     std::to_string(m.feature_size.length()));
  Tensor batch({1, features.size()}, std::vector<float>(features.begin(), features.end()));
  return reconstruct_batch(m, batch).reshaped({m.input_h, m.input_w});
}

}  // namespace utfe::extractors
