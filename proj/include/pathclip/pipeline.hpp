// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end workflow steps (fit, plan, train, generate, invert, evaluate,
// demo) built on the pipeline configuration.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pathclip/config.hpp"

namespace pathclip {

/// Progress hook: stage name, step, total steps (0 when unknown), value.
using ProgressFn = std::function<void(const std::string& stage, int step, int total, double value)>;

/// Fits one polygon per mask file. The canvas is the first mask's size.
SceneFit fit_mask_files(const PipelineConfig& cfg, const std::vector<std::filesystem::path>& masks,
                        const std::vector<std::string>& captions);

LayoutScene plan_prompt(const PipelineConfig& cfg, const std::string& prompt);

/// Trains on the configured synthetic dataset.
TrainResult train_model(const PipelineConfig& cfg, std::uint64_t seed, const ProgressFn& progress = {});

/// Model weights from cfg.weights when that file exists, otherwise a freshly
/// trained model (saved to `save_to` when non-empty).
ToyDenoiser obtain_model(const PipelineConfig& cfg, std::uint64_t seed, const std::filesystem::path& save_to,
                         const ProgressFn& progress = {});

/// Guided generation; `condition` holds [0, 1] RGB values. The result image
/// is returned in [0, 1].
struct Generation {
  Tensor image;
  GuidedResult guided;
};
Generation generate_image(const Denoiser& model, const PipelineConfig& cfg, const LayoutScene& scene,
                          const Tensor* condition, std::uint64_t seed, const ProgressFn& progress = {});

/// DDIM inversion of a [0, 1] image, conditioned on `scene` when given (null
/// conditioning otherwise), plus the relative L2 error of sampling back.
struct Inversion {
  InversionResult result;
  Tensor reconstruction;  // [0, 1]
  double round_trip_error = 0.0;
};
Inversion invert_image(const Denoiser& model, const PipelineConfig& cfg, const Tensor& image,
                       const LayoutScene* scene);

/// Layout adherence over cfg.eval_scenes held-out synthetic scenes with
/// cfg.eval_primitives primitives each, generated without a spatial condition.
struct AdherenceSummary {
  std::vector<LayoutAdherenceReport> reports;
  double median_precision = 0.0;
  double median_recall = 0.0;
  double median_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};
std::vector<LayoutScene> evaluation_scenes(const PipelineConfig& cfg, std::uint64_t seed);
AdherenceSummary evaluate_model(const Denoiser& model, const PipelineConfig& cfg, std::uint64_t seed,
                                const ProgressFn& progress = {});
std::string summary_to_json(const AdherenceSummary& summary);

double median(std::vector<double> values);

/// Writes the demo bundle into `out_dir` and returns the report JSON. Stage
/// timings go to timings.json so the report itself is reproducible.
std::string run_demo(const PipelineConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                     const ProgressFn& progress = {});

/// Tiles [0, 1] images into a grid with one-pixel grey separators.
Tensor tile_images(const std::vector<Tensor>& images, int columns);

}  // namespace pathclip
