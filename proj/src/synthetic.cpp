// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pathclip/error.hpp"

namespace pathclip {
namespace {

constexpr int kMaxPlacementTries = 200;

double round2(double v) { return std::round(v * 100.0) / 100.0; }

struct Bounds {
  double x0, y0, x1, y1;
};

bool separated(const Bounds& a, const Bounds& b, double gap) {
  return a.x1 + gap <= b.x0 || b.x1 + gap <= a.x0 || a.y1 + gap <= b.y0 || b.y1 + gap <= a.y0;
}

// Star-shaped around its centre, so the vertex order always gives a simple polygon.
std::vector<Point> random_polygon(std::mt19937_64& rng, int k, const SyntheticOptions& opt) {
  std::uniform_real_distribution<double> radius_dist(opt.min_radius, opt.max_radius);
  const double r = radius_dist(rng);
  std::uniform_real_distribution<double> cx_dist(r + 1.0, opt.canvas - r - 1.0);
  const double cx = cx_dist(rng);
  const double cy = cx_dist(rng);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter_dist(-0.3, 0.3);
  std::uniform_real_distribution<double> scale_dist(0.75, 1.0);
  const double phase = phase_dist(rng);
  const double step = 2.0 * std::numbers::pi / k;
  std::vector<Point> pts;
  for (int i = 0; i < k; ++i) {
    const double a = phase + i * step + jitter_dist(rng) * step / 2.0;
    const double rr = r * scale_dist(rng);
    pts.push_back({round2(cx + rr * std::cos(a)), round2(cy + rr * std::sin(a))});
  }
  return pts;
}

}  // namespace

const std::vector<PaletteColor>& palette() {
  static const std::vector<PaletteColor> colors = {
      {"red", {1, 0, 0}},  {"green", {0, 1, 0}},   {"blue", {0, 0, 1}},  {"yellow", {1, 1, 0}},
      {"cyan", {0, 1, 1}}, {"magenta", {1, 0, 1}}, {"white", {1, 1, 1}},
  };
  return colors;
}

const PaletteColor& palette_color(const std::string& name) {
  for (const auto& c : palette()) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kUnknownPaletteToken, "'" + name + "' is not a palette colour");
}

const PaletteColor& primitive_color(const PathClipPrimitive& primitive) {
  for (const auto& token : primitive.appearance.tokens) {
    for (const auto& c : palette()) {
      if (c.name == token) return c;
    }
  }
  throw Error(ErrorCode::kUnknownPaletteToken,
              "appearance '" + primitive.appearance.text() + "' names no palette colour");
}

std::string shape_category(std::size_t vertex_count) {
  switch (vertex_count) {
    case 4: return "quad";
    case 5: return "pentagon";
    case 6: return "hexagon";
    default: return "polygon";
  }
}

SyntheticSample make_synthetic_sample(std::mt19937_64& rng, int num_primitives, const SyntheticOptions& options) {
  const auto n_colors = static_cast<int>(palette().size());
  if (num_primitives < 1 || num_primitives > n_colors) {
    throw Error(ErrorCode::kInvalidArgument, "primitive count must be in 1.." + std::to_string(n_colors));
  }
  std::uniform_int_distribution<int> k_dist(static_cast<int>(kMinVertices), static_cast<int>(kDefaultMaxVertices));
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    std::vector<Bounds> placed;
    std::vector<std::vector<Point>> polys;
    for (int i = 0; i < num_primitives; ++i) {
      bool ok = false;
      for (int tries = 0; tries < kMaxPlacementTries && !ok; ++tries) {
        auto pts = random_polygon(rng, k_dist(rng), options);
        const Box b = bounding_box(pts);
        const Bounds bounds{b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2};
        if (!std::all_of(placed.begin(), placed.end(),
                         [&](const Bounds& o) { return separated(bounds, o, options.gap); })) {
          continue;
        }
        if (rasterize(pts, options.canvas, options.canvas).count() < options.min_area) continue;
        placed.push_back(bounds);
        polys.push_back(std::move(pts));
        ok = true;
      }
      if (!ok) break;
    }
    if (static_cast<int>(polys.size()) != num_primitives) continue;

    std::vector<int> order(static_cast<std::size_t>(n_colors));
    for (int i = 0; i < n_colors; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    SyntheticSample sample;
    sample.scene.canvas_w = options.canvas;
    sample.scene.canvas_h = options.canvas;
    sample.scene.global_caption = kSyntheticCaption;
    for (int i = 0; i < num_primitives; ++i) {
      PathClipPrimitive prim;
      const std::size_t k = polys[i].size();
      prim.path = PathParams::from_points(std::move(polys[i]));
      prim.appearance.tokens = {shape_category(k), palette()[order[i]].name};
      sample.scene.primitives.push_back(std::move(prim));
    }
    sample.image = render_scene(sample.scene);
    return sample;
  }
  throw Error(ErrorCode::kInvalidArgument, "could not place the requested primitives on the canvas");
}

std::vector<SyntheticSample> make_synthetic_dataset(int n, std::uint64_t seed, const SyntheticOptions& options) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "dataset size must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count_dist(options.min_primitives, options.max_primitives);
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(make_synthetic_sample(rng, count_dist(rng), options));
  return out;
}

LayoutScene recolor_scene(const LayoutScene& scene) {
  std::vector<std::string> used;
  for (const auto& prim : scene.primitives) used.push_back(primitive_color(prim).name);
  LayoutScene out = scene;
  std::size_t next = 0;
  for (auto& prim : out.primitives) {
    const std::string old = primitive_color(prim).name;
    while (next < palette().size() && std::find(used.begin(), used.end(), palette()[next].name) != used.end()) ++next;
    if (next == palette().size()) throw Error(ErrorCode::kInvalidArgument, "not enough unused palette colours");
    for (auto& token : prim.appearance.tokens) {
      if (token == old) {
        token = palette()[next].name;
        break;
      }
    }
    ++next;
  }
  return out;
}

Tensor render_scene(const LayoutScene& scene) {
  Tensor img(scene.canvas_h, scene.canvas_w, 3);
  for (const auto& prim : scene.primitives) {
    const auto& color = primitive_color(prim);
    const PolygonMask mask = rasterize(prim, scene.canvas_w, scene.canvas_h);
    const auto cells = mask.cells();
    for (int p = 0; p < img.positions(); ++p) {
      if (!cells[p]) continue;
      auto px = img.at(p);
      for (int c = 0; c < 3; ++c) px[c] = color.rgb[c];
    }
  }
  return img;
}

Tensor to_model_range(const Tensor& image) {
  Tensor out = image;
  for (auto& v : out.values()) v = 2.0 * v - 1.0;
  return out;
}

Tensor from_model_range(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.values()) v = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
  return out;
}

}  // namespace pathclip
