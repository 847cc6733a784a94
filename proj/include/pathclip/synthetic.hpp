// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural flat-colour polygon scenes with exact ground truth.

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pathclip/geometry.hpp"
#include "pathclip/tensor.hpp"

namespace pathclip {

struct PaletteColor {
  std::string name;
  std::array<double, 3> rgb;  // components in {0, 1}
};

/// Named foreground colours; the background is black.
const std::vector<PaletteColor>& palette();

/// Throws UnknownPaletteToken.
const PaletteColor& palette_color(const std::string& name);

/// The first appearance token naming a palette colour. Throws UnknownPaletteToken.
const PaletteColor& primitive_color(const PathClipPrimitive& primitive);

/// "quad", "pentagon" or "hexagon".
std::string shape_category(std::size_t vertex_count);

inline const std::string kSyntheticCaption = "flat shapes on a plain canvas";

struct SyntheticOptions {
  int canvas = 32;
  int min_primitives = 1;
  int max_primitives = 3;
  double min_radius = 4.0;
  double max_radius = 9.0;
  std::size_t min_area = 12;  // pixels per primitive
  double gap = 1.0;           // minimum spacing between bounding boxes
};

struct SyntheticSample {
  Tensor image;  // canvas x canvas x 3, values in [0, 1]
  LayoutScene scene;
};

/// One scene with exactly `num_primitives` separated simple polygons in
/// distinct palette colours.
SyntheticSample make_synthetic_sample(std::mt19937_64& rng, int num_primitives, const SyntheticOptions& options);

/// n samples with 1..3 primitives each; deterministic per seed.
std::vector<SyntheticSample> make_synthetic_dataset(int n, std::uint64_t seed, const SyntheticOptions& options = {});

/// Fills every primitive's raster with its palette colour over black.
Tensor render_scene(const LayoutScene& scene);

/// Same polygons with each palette colour token replaced by a palette colour
/// the scene does not use, in palette order. Throws UnknownPaletteToken and
/// InvalidArgument when the palette runs out.
LayoutScene recolor_scene(const LayoutScene& scene);

/// [0, 1] image values to the model range [-1, 1] and back (clamped).
Tensor to_model_range(const Tensor& image);
Tensor from_model_range(const Tensor& x);

}  // namespace pathclip
