// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Small pixel-space convolutional denoiser with one grounded cross-attention
// block, and its trainer.
//
//   h0 = silu(conv3x3(x_t) + time(sqrt(alpha_bar)))
//   h1 = h0 + attention(q = h0 Wq; fused primitive and caption tokens)   <- features
//   x0 = conv1x1(silu(conv3x3(h1)))
//   eps = (x_t - sqrt(a) x0) / sqrt(1 - a)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pathclip/diffusion.hpp"
#include "pathclip/grounding.hpp"
#include "pathclip/synthetic.hpp"

namespace pathclip {

struct ToyModelConfig {
  int image_size = 32;
  int channels = 16;     // C, also the feature channel count C_f
  int attn_dim = 16;     // d
  int fusion_dim = 32;   // d_b
  int text_dim = 64;     // d_theta
  int num_freqs = 8;     // path Fourier frequencies
  int time_freqs = 4;
  std::uint64_t text_seed = 0x5EED;
  bool masked_attention = true;  // false: the ablation without attention masks

  void validate() const;
  int path_dim() const { return 2 * num_freqs * static_cast<int>(4 + 2 * kDefaultMaxVertices); }
  int fusion_input_dim() const { return text_dim + path_dim(); }
};

struct ToyParameters {
  Matrix conv1_w;  // 9*3 x C (im2col rows: ky, kx, channel)
  Matrix conv1_b;  // 1 x C
  Matrix time_w;   // 2*time_freqs x C
  Matrix wq;       // C x d
  Matrix wk;       // d_b x d
  Matrix wv;       // d_b x C
  Matrix conv2_w;  // 9*C x C
  Matrix conv2_b;  // 1 x C
  Matrix head_w;   // C x 3
  Matrix head_b;   // 1 x 3
  FusionNetwork fusion;

  static ToyParameters random(const ToyModelConfig& config, std::uint64_t seed);
  ToyParameters zeros_like() const;

  /// Every trainable array, in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Fused-token inputs for one attention group and the positions it writes to.
struct TokenGroup {
  Matrix inputs;               // L x (d_theta + d_tau), before fusion
  std::vector<double> weight;  // per position, 0 or 1
};

struct EncodedConditioning {
  std::vector<TokenGroup> groups;
};

/// One denoising example: x_t, its clean target, timestep and conditioning.
struct TrainingExample {
  const Tensor* x_t = nullptr;
  const Tensor* x0 = nullptr;
  Timestep ts;
  const EncodedConditioning* cond = nullptr;
};

class ToyDenoiser final : public Denoiser {
 public:
  ToyDenoiser(ToyModelConfig config, ToyParameters params);
  static ToyDenoiser random(const ToyModelConfig& config, std::uint64_t seed);

  Prediction predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const override;
  Tensor feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                     const Tensor& grad_features) const override;
  std::string feature_tag() const override { return "post_masked_cross_attention"; }

  Prediction predict(const Tensor& x, const Timestep& ts, const EncodedConditioning& cond) const;
  Tensor predict_x0(const Tensor& x, const Timestep& ts, const Conditioning& cond) const;

  /// Token groups for a conditioning: masked attention gives one group per
  /// primitive plus the caption (or null token) on uncovered positions;
  /// unmasked attention gives a single group over all tokens everywhere.
  EncodedConditioning encode(const Conditioning& cond) const;

  /// Mean squared x0 error over the batch; gradients are accumulated into `grad`.
  double loss_and_gradient(std::span<const TrainingExample> batch, ToyParameters& grad) const;

  const ToyModelConfig& config() const { return config_; }
  const ToyParameters& parameters() const { return params_; }
  ToyParameters& parameters() { return params_; }

  /// Magic "PCTD", version, config, then each parameter array as u32 length
  /// plus little-endian float64 values.
  void save(const std::filesystem::path& path) const;
  static ToyDenoiser load(const std::filesystem::path& path);

 private:
  struct Cache;
  void forward(const Tensor& x, double alpha_bar, const EncodedConditioning& cond, Cache& cache,
               bool full) const;
  Matrix backward_features(const Cache& cache, const Matrix& d_h1, ToyParameters* grad, bool want_dx) const;

  ToyModelConfig config_;
  ToyParameters params_;
  HashTextEncoder text_;
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 8;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double caption_dropout = 0.5;
  double uncond_dropout = 0.1;  // drop primitives and caption together

  void validate() const;
};

struct TrainCounters {
  std::int64_t batches = 0;
  std::int64_t samples = 0;
  std::int64_t null_caption_samples = 0;
  std::int64_t null_condition_samples = 0;
  std::int64_t batches_with_null_tokens = 0;
};

struct TrainResult {
  ToyDenoiser model;
  std::vector<double> epoch_losses;
  TrainCounters counters;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Deterministic given the seed. Throws EmptyDataset.
TrainResult train_toy_denoiser(std::span<const SyntheticSample> dataset, const NoiseSchedule& schedule,
                               const ToyModelConfig& model_config, const TrainConfig& train_config,
                               std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace pathclip
