// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key = value pipeline configuration shared by the CLI and the C API.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathclip/diffusion.hpp"
#include "pathclip/evaluate.hpp"
#include "pathclip/guidance.hpp"
#include "pathclip/planner.hpp"
#include "pathclip/polygon_fit.hpp"
#include "pathclip/synthetic.hpp"
#include "pathclip/toy_denoiser.hpp"

namespace pathclip {

struct PipelineConfig {
  std::uint64_t seed = 0;

  // Diffusion schedule.
  std::string schedule_kind = "cosine";  // cosine | linear
  int schedule_steps = 100;
  double schedule_offset = 0.008;
  double schedule_max_beta = 0.5;
  double schedule_beta_start = 1e-4;  // linear only
  double schedule_beta_end = 0.02;    // linear only
  // Full-scale reference values, recorded for documentation only.
  int full_scale_sample_steps = 200;
  int full_scale_invert_steps = 1000;
  int full_scale_guided_steps = 120;
  double full_scale_lambda_s = kFullScaleLambdaS;

  GuidanceConfig guidance;  // also holds the sampling and inversion step counts

  PsoConfig pso;

  std::string planner_backend = "mock";  // mock | remote
  std::string planner_fixtures = "fixtures";
  std::string planner_url;
  int planner_max_tokens = 512;
  int planner_timeout_ms = 30000;
  int planner_retries = 2;
  int planner_max_in_flight = 4;

  ToyModelConfig model;
  TrainConfig train;
  int dataset_size = 400;
  std::uint64_t dataset_seed = 1;
  SyntheticOptions synthetic;  // synthetic.canvas is also the planner canvas

  EvaluationOptions evaluation;
  int eval_scenes = 50;
  int eval_primitives = 2;

  std::string weights;  // toy model weights; empty means train when needed

  /// Throws Config naming the first invalid key.
  void validate() const;

  /// Sets one key from its text form. Throws Config for unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// One "key = value" line per key, in keys() order; doubles use %.17g.
  std::string serialize() const;
  /// Applies `key = value` lines on top of the defaults. '#' starts a comment.
  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::string& path);

  NoiseSchedule make_schedule() const;
  RemoteOptions remote_options() const;

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
    return a.serialize() == b.serialize();
  }
};

}  // namespace pathclip
