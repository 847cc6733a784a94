// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Palette-based layout adherence: detect flat-colour regions in a generated
// image and match them against the scene's primitives.

#pragma once

#include <string>
#include <vector>

#include "pathclip/geometry.hpp"
#include "pathclip/tensor.hpp"

namespace pathclip {

struct DetectedRegion {
  std::string color;
  PolygonMask mask;
};

struct RegionMatch {
  int region = -1;
  int primitive = -1;
  double iou = 0.0;
};

struct LayoutAdherenceReport {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;  // TP / (TP + FP + FN)
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  bool zero_detections = false;  // precision undefined, reported as 0
  std::vector<DetectedRegion> regions;
  std::vector<RegionMatch> matches;
};

struct EvaluationOptions {
  double iou_tolerance = 0.5;
  std::size_t min_region_area = 4;
};

/// Index into palette() of the nearest colour, or -1 for black.
int quantize_pixel(std::span<const double> rgb);

/// 4-connected single-colour regions of at least `min_area` pixels, in
/// palette order. `image` holds RGB values in [0, 1].
std::vector<DetectedRegion> detect_regions(const Tensor& image, std::size_t min_area);

/// Greedy one-to-one matching by descending IoU among same-colour pairs with
/// IoU >= tolerance. Throws UnknownPaletteToken, DimensionMismatch.
LayoutAdherenceReport evaluate_layout_adherence(const Tensor& image, const LayoutScene& scene,
                                                const EvaluationOptions& options = {});

/// Counts, ratios and matches; regions are summarised by colour and area.
std::string report_to_json(const LayoutAdherenceReport& report);

}  // namespace pathclip
