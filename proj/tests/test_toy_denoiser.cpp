// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "guidance_fixture.hpp"
#include "pathclip/error.hpp"
#include "pathclip/io.hpp"
#include "pathclip/toy_denoiser.hpp"
#include "test_support.hpp"

namespace pathclip {
namespace {

SyntheticOptions small_synthetic(int canvas) {
  SyntheticOptions o;
  o.canvas = canvas;
  o.min_radius = 2.0;
  o.max_radius = 3.5;
  o.min_area = 4;
  o.max_primitives = 2;
  return o;
}

TEST(ToyDenoiser, ShapesTagAndDeterminism) {
  const ToyModelConfig cfg = testing::small_model_config(8);
  const ToyDenoiser model = ToyDenoiser::random(cfg, 1);
  const Tensor x = gaussian_noise(8, 8, 3, 2);
  const Conditioning cond = Conditioning::from_scene(testing::two_box_scene(8));
  const Prediction p = model.predict(x, {10, 0.5}, cond);
  EXPECT_TRUE(p.eps.same_shape(x));
  EXPECT_EQ(p.features.height(), 8);
  EXPECT_EQ(p.features.channels(), cfg.channels);
  EXPECT_EQ(model.feature_tag(), "post_masked_cross_attention");
  EXPECT_EQ(model.predict(x, {10, 0.5}, cond).eps, p.eps);
  for (double v : p.eps.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(ToyDenoiser, EmptySceneIsTheNullConditioning) {
  const ToyDenoiser model = ToyDenoiser::random(testing::small_model_config(8), 3);
  LayoutScene empty;
  empty.canvas_w = empty.canvas_h = 8;
  const NoiseSchedule s = NoiseSchedule::cosine(20);
  const Tensor xT = gaussian_noise(8, 8, 3, 4);
  EXPECT_EQ(ddim_sample(model, Conditioning::from_scene(empty), s, xT, 10, false).x0,
            ddim_sample(model, Conditioning::null(8, 8), s, xT, 10, false).x0);
}

TEST(ToyDenoiser, MaskedAttentionIsLocal) {
  const ToyDenoiser model = ToyDenoiser::random(testing::small_model_config(8), 5);
  const LayoutScene scene = testing::two_box_scene(8);
  LayoutScene changed = scene;
  changed.primitives[0].appearance.tokens = {"quad", "white", "striped"};
  const Tensor x = gaussian_noise(8, 8, 3, 6);
  const Tensor a = model.predict(x, {5, 0.7}, Conditioning::from_scene(scene)).features;
  const Tensor b = model.predict(x, {5, 0.7}, Conditioning::from_scene(changed)).features;
  const PolygonMask m = rasterize(scene.primitives[0], 8, 8);
  int changed_inside = 0;
  for (int p = 0; p < 64; ++p) {
    bool differs = false;
    for (int c = 0; c < a.channels(); ++c) differs |= a.at(p)[static_cast<std::size_t>(c)] != b.at(p)[static_cast<std::size_t>(c)];
    if (m.cells()[static_cast<std::size_t>(p)]) {
      changed_inside += differs ? 1 : 0;
    } else {
      EXPECT_FALSE(differs) << "position " << p;
    }
  }
  EXPECT_EQ(changed_inside, static_cast<int>(m.count()));

  ToyModelConfig unmasked_cfg = testing::small_model_config(8);
  unmasked_cfg.masked_attention = false;
  const ToyDenoiser unmasked = ToyDenoiser::random(unmasked_cfg, 5);
  const Tensor ua = unmasked.predict(x, {5, 0.7}, Conditioning::from_scene(scene)).features;
  const Tensor ub = unmasked.predict(x, {5, 0.7}, Conditioning::from_scene(changed)).features;
  int changed_outside = 0;
  for (int p = 0; p < 64; ++p) {
    if (!m.cells()[static_cast<std::size_t>(p)] && ua.at(p)[0] != ub.at(p)[0]) ++changed_outside;
  }
  EXPECT_GT(changed_outside, 0);
}

TEST(ToyDenoiser, FeatureVjpMatchesFiniteDifferences) {
  const ToyDenoiser model = ToyDenoiser::random(testing::small_model_config(8), 7);
  const Conditioning cond = Conditioning::from_scene(testing::two_box_scene(8));
  const Timestep ts{7, 0.6};
  const Tensor x = gaussian_noise(8, 8, 3, 8);
  const Tensor w = gaussian_noise(8, 8, model.config().channels, 9);  // random cotangent
  auto objective = [&](const Tensor& in) {
    const Tensor f = model.predict(in, ts, cond).features;
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * w[i];
    return s;
  };
  const Tensor g = model.feature_vjp(x, ts, cond, w);
  const Tensor fd = energy_gradient({objective, {}}, x, GradientMode::kFiniteDifference, 1e-5);
  double num = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) num += (g[i] - fd[i]) * (g[i] - fd[i]);
  EXPECT_LE(std::sqrt(num) / fd.norm(), 1e-6);
}

TEST(ToyDenoiser, LossGradientMatchesFiniteDifferences) {
  const ToyDenoiser model = ToyDenoiser::random(testing::small_model_config(8), 11);
  const LayoutScene scene = testing::two_box_scene(8);
  const EncodedConditioning enc = model.encode(Conditioning::from_scene(scene));
  const Tensor x0 = to_model_range(render_scene(scene));
  const Tensor xt = gaussian_noise(8, 8, 3, 12);
  const std::vector<TrainingExample> batch = {{&xt, &x0, {9, 0.4}, &enc}};
  ToyParameters grad = model.parameters().zeros_like();
  model.loss_and_gradient(batch, grad);

  auto tensors = grad.tensors();
  std::mt19937_64 rng(13);
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    if (tensors[ti].empty()) continue;
    for (int probe = 0; probe < 2; ++probe) {
      const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, tensors[ti].size() - 1)(rng);
      ToyDenoiser plus = model, minus = model;
      const double h = 1e-6;
      plus.parameters().tensors()[ti][idx] += h;
      minus.parameters().tensors()[ti][idx] -= h;
      ToyParameters scratch = model.parameters().zeros_like();
      const double lp = plus.loss_and_gradient(batch, scratch);
      const double lm = minus.loss_and_gradient(batch, scratch);
      const double fd = (lp - lm) / (2 * h);
      EXPECT_NEAR(tensors[ti][idx], fd, 1e-6 + 1e-4 * std::abs(fd)) << "tensor " << ti << " index " << idx;
    }
  }
}

TEST(ToyDenoiser, SaveLoadIsLossless) {
  ToyModelConfig cfg = testing::small_model_config(8);
  cfg.masked_attention = false;
  const ToyDenoiser model = ToyDenoiser::random(cfg, 21);
  testing::TempDir dir;
  model.save(dir / "m.bin");
  const ToyDenoiser back = ToyDenoiser::load(dir / "m.bin");
  EXPECT_FALSE(back.config().masked_attention);
  EXPECT_EQ(back.config().channels, cfg.channels);
  const Tensor x = gaussian_noise(8, 8, 3, 22);
  const Conditioning cond = Conditioning::from_scene(testing::two_box_scene(8));
  EXPECT_EQ(back.predict(x, {3, 0.9}, cond).eps, model.predict(x, {3, 0.9}, cond).eps);

  write_text_file(dir / "junk.bin", "not a model");
  EXPECT_THROW(ToyDenoiser::load(dir / "junk.bin"), Error);
  EXPECT_THROW(ToyDenoiser::load(dir / "absent.bin"), Error);
}

TEST(Training, LossDecreasesAndIsDeterministic) {
  const auto data = make_synthetic_dataset(24, 1, small_synthetic(12));
  const NoiseSchedule s = NoiseSchedule::cosine(50);
  TrainConfig tc;
  tc.epochs = 6;
  std::vector<double> ratios;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TrainResult r = train_toy_denoiser(data, s, testing::small_model_config(12), tc, seed);
    ASSERT_EQ(r.epoch_losses.size(), 6u);
    ratios.push_back(r.epoch_losses.back() / r.epoch_losses.front());
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_LE(ratios[1], 1.0);

  tc.epochs = 2;
  const TrainResult a = train_toy_denoiser(data, s, testing::small_model_config(12), tc, 9);
  const TrainResult b = train_toy_denoiser(data, s, testing::small_model_config(12), tc, 9);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.model.parameters().conv1_w, b.model.parameters().conv1_w);
}

TEST(Training, DropoutCounters) {
  const auto data = make_synthetic_dataset(16, 2, small_synthetic(12));
  const NoiseSchedule s = NoiseSchedule::cosine(50);
  TrainConfig tc;
  tc.epochs = 2;
  tc.caption_dropout = 1.0;
  tc.uncond_dropout = 0.0;
  const TrainResult all = train_toy_denoiser(data, s, testing::small_model_config(12), tc, 1);
  EXPECT_EQ(all.counters.samples, 32);
  EXPECT_EQ(all.counters.null_caption_samples, all.counters.samples);
  EXPECT_EQ(all.counters.batches_with_null_tokens, all.counters.batches);
  EXPECT_EQ(all.counters.null_condition_samples, 0);

  tc.caption_dropout = 0.0;
  const TrainResult none = train_toy_denoiser(data, s, testing::small_model_config(12), tc, 1);
  EXPECT_EQ(none.counters.null_caption_samples, 0);
  EXPECT_EQ(none.counters.batches_with_null_tokens, 0);

  tc.caption_dropout = 0.5;
  tc.epochs = 10;
  const TrainResult half = train_toy_denoiser(data, s, testing::small_model_config(12), tc, 1);
  const double frac = static_cast<double>(half.counters.null_caption_samples) / half.counters.samples;
  EXPECT_NEAR(frac, 0.5, 0.15);
}

TEST(Training, EmptyDataset) {
  try {
    train_toy_denoiser({}, NoiseSchedule::cosine(10), testing::small_model_config(8), {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

}  // namespace
}  // namespace pathclip
