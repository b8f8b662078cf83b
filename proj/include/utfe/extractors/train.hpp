#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "utfe/data/noise.hpp"
#include "utfe/data/split.hpp"
#include "utfe/extractors/model.hpp"
#include "utfe/nn/loss.hpp"

namespace utfe::extractors {

/// What a denoising model is asked to reproduce.
enum class DenoisingTarget { clean, noisy };

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::optional<data::NoiseConfig> noise;  // required for DAE/DCAE
  DenoisingTarget target = DenoisingTarget::clean;

  void validate(ExtractorKind kind) const {
    if (epochs < 1) throw ArgumentError("training needs epochs >= 1");
    if (batch_size < 1) throw ArgumentError("training needs batch_size >= 1");
    if (!(learning_rate >= 0.0)) throw ArgumentError("learning rate must be >= 0");
    if (is_denoising(kind) && !noise) throw ArgumentError(to_string(kind) + " training requires a noise config");
    if (noise) noise->validate();
  }
};

/// Noise stream seed used when a command line only supplies one seed.
inline data::NoiseConfig default_noise(std::uint64_t seed, double sigma = 0.2) {
  return {sigma, derive_seed(seed, kNoiseStream)};
}

struct TrainResult {
  std::vector<double> loss_history;  // one entry per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Minibatch Adam on the reconstruction MSE (pixels in [0, 1]). Each epoch
/// visits the images in a fresh seeded order; denoising kinds see speckled
/// inputs and, by default, clean targets. The epoch loss is the mean
/// per-image loss before each batch's update, summed in image order.
inline TrainResult train(ExtractorModel& model, std::span<const data::Image> images, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  if (model.kind == ExtractorKind::dct) throw TrainingError("the DCT extractor has nothing to train");
  if (images.empty()) throw TrainingError("cannot train on an empty dataset");
  config.validate(model.kind);
  for (const auto& img : images)
    if (img.pixels.shape() != model.image_shape())
      throw ShapeError("training image " + to_string(img.pixels.shape()) + " does not match model input " +
                       to_string(model.image_shape()));

  const std::size_t n = images.size(), h = model.input_h, w = model.input_w, px = h * w;
  const bool noisy_input = is_denoising(model.kind);
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng noise_rng(noisy_input ? config.noise->seed : 0);
  nn::AdamConfig adam;
  adam.learning_rate = config.learning_rate;

  std::vector<nn::Param<float>*> params = model.encoder.params();
  for (auto* p : model.decoder.params()) params.push_back(p);

  TrainResult result;
  std::vector<double> per_image(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = data::shuffled_indices(n, shuffle_rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Tensor input({b, 1, h, w}), target({b, 1, h, w});
      for (std::size_t k = 0; k < b; ++k) {
        const Tensor& clean = images[order[start + k]].pixels;
        if (noisy_input) {
          const Tensor corrupted = data::corrupt(clean, config.noise->sigma, noise_rng);
          std::copy(corrupted.values().begin(), corrupted.values().end(), input.data() + k * px);
          const Tensor& tgt = config.target == DenoisingTarget::clean ? clean : corrupted;
          std::copy(tgt.values().begin(), tgt.values().end(), target.data() + k * px);
        } else {
          std::copy(clean.values().begin(), clean.values().end(), input.data() + k * px);
          std::copy(clean.values().begin(), clean.values().end(), target.data() + k * px);
        }
      }

      model.encoder.zero_grad();
      model.decoder.zero_grad();
      const Tensor output = model.decoder.forward(model.encoder.forward(std::move(input)));
      const auto loss = nn::mse_loss(output, target);
      if (!std::isfinite(loss.loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                            std::to_string(start));
      for (std::size_t k = 0; k < b; ++k) {
        double sum = 0.0;
        for (std::size_t p = 0; p < px; ++p) {
          const double d = static_cast<double>(output[k * px + p]) - static_cast<double>(target[k * px + p]);
          sum += d * d;
        }
        per_image[order[start + k]] = sum / static_cast<double>(px);
      }
      model.encoder.backward(model.decoder.backward(loss.grad), false);
      nn::adam_step<float>(params, adam);
    }
    double total = 0.0;
    for (double v : per_image) total += v;
    const double epoch_loss = total / static_cast<double>(n);
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  model.meta.epochs_run = static_cast<std::uint32_t>(config.epochs);
  model.meta.final_loss = static_cast<float>(result.loss_history.back());
  model.meta.seed = config.seed;
  return result;
}

}  // namespace utfe::extractors
