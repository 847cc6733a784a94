// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Particle swarm fitting of k-vertex polygons to binary instance masks.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathclip/geometry.hpp"

namespace pathclip {

struct PsoConfig {
  int swarm_size = 64;
  int iterations = 200;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  int k = 4;
  std::uint64_t seed = 0;
  double velocity_clamp = 0.2;  // fraction of the canvas diagonal
  double init_jitter = 0.05;    // Gaussian sigma, fraction of the diagonal
  int k_min = 4;
  int k_max = 6;
  // Ring neighbourhood radius for the social term; 0 uses the global best.
  int neighborhood = 1;

  /// Throws Config on any out-of-range field.
  void validate() const;
};

struct Particle {
  std::vector<double> position;  // x0, y0, x1, y1, ...
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_fitness = 0.0;
};

struct FitResult {
  PathParams path;
  double iou = 0.0;
  std::vector<double> best_history;  // global best after init and each iteration
};

/// IoU between the rasterized candidate (after vertex normalization) and the
/// mask; degenerate candidates score 0. Throws EmptyMask.
double fitness(std::span<const double> position, const PolygonMask& mask);

FitResult fit_polygon(const PolygonMask& mask, const PsoConfig& cfg);

/// Largest 4-connected foreground component (ties: first in scan order).
PolygonMask largest_component(const PolygonMask& mask, std::size_t* component_count = nullptr);

struct SceneFit {
  LayoutScene scene;
  std::vector<double> ious;
  std::vector<int> chosen_k;
  std::vector<std::string> warnings;
};

/// One primitive per mask; k searched over [cfg.k_min, cfg.k_max], ties go to
/// the smaller k. Multi-component masks keep their largest component.
SceneFit fit_scene(std::span<const PolygonMask> masks, std::span<const std::string> captions, const PsoConfig& cfg);

}  // namespace pathclip
