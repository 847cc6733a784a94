// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/polygon_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "pathclip/error.hpp"
#include "pathclip/seed.hpp"

namespace pathclip {

void PsoConfig::validate() const {
  if (swarm_size < 2) throw Error(ErrorCode::kConfig, "pso swarm_size must be >= 2");
  if (iterations < 1) throw Error(ErrorCode::kConfig, "pso iterations must be >= 1");
  if (!(inertia > 0.0 && inertia < 1.0)) throw Error(ErrorCode::kConfig, "pso inertia must be in (0, 1)");
  if (cognitive < 0.0 || social < 0.0) throw Error(ErrorCode::kConfig, "pso coefficients must be >= 0");
  if (!(velocity_clamp > 0.0)) throw Error(ErrorCode::kConfig, "pso velocity_clamp must be > 0");
  if (init_jitter < 0.0) throw Error(ErrorCode::kConfig, "pso init_jitter must be >= 0");
  if (neighborhood < 0) throw Error(ErrorCode::kConfig, "pso neighborhood must be >= 0");
  if (k_min < static_cast<int>(kMinVertices) || k_max < k_min) {
    throw Error(ErrorCode::kConfig, "pso vertex range must satisfy 4 <= k_min <= k_max");
  }
  if (k < k_min || k > k_max) {
    throw Error(ErrorCode::kConfig,
                "vertex count k=" + std::to_string(k) + " outside " + std::to_string(k_min) + ".." +
                    std::to_string(k_max));
  }
}

namespace {

std::vector<Point> to_points(std::span<const double> position) {
  std::vector<Point> points(position.size() / 2);
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = {position[2 * i], position[2 * i + 1]};
  return points;
}

struct PixelBox {
  int x0, y0, x1, y1;  // pixel-edge coordinates, exclusive upper bound
};

PixelBox foreground_box(const PolygonMask& mask) {
  PixelBox box{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  return box;
}

// Box corners clockwise from top-left, padded to k vertices with extra
// vertices on the edges. `variant` rotates which edges receive them and where
// along the edge they sit, so the initial swarm covers every edge.
std::vector<double> box_polygon(const PixelBox& b, int k, int variant) {
  const std::array<Point, 4> corners = {Point{double(b.x0), double(b.y0)}, Point{double(b.x1), double(b.y0)},
                                        Point{double(b.x1), double(b.y1)}, Point{double(b.x0), double(b.y1)}};
  const int extra = k - 4;
  const double frac = 0.25 + 0.125 * ((variant / 4) % 5);
  std::vector<double> pos;
  pos.reserve(2 * static_cast<std::size_t>(k));
  for (int e = 0; e < 4; ++e) {
    const Point& a = corners[static_cast<std::size_t>(e)];
    const Point& c = corners[static_cast<std::size_t>((e + 1) % 4)];
    pos.push_back(a.x);
    pos.push_back(a.y);
    for (int j = 0; j < extra; ++j) {
      if ((variant + j) % 4 != e) continue;
      pos.push_back(a.x + (c.x - a.x) * frac);
      pos.push_back(a.y + (c.y - a.y) * frac);
    }
  }
  return pos;
}

}  // namespace

double fitness(std::span<const double> position, const PolygonMask& mask) {
  if (mask.empty_foreground()) throw Error(ErrorCode::kEmptyMask, "fitness against an empty mask");
  const std::vector<Point> points = to_points(position);
  if (points.size() < 3) return 0.0;
  if (!(polygon_area(normalize_vertices(points)) > 0.0)) return 0.0;
  try {
    return polygon_iou(rasterize(points, mask.width(), mask.height()), mask);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDegeneratePolygon) return 0.0;
    throw;
  }
}

namespace {

// Reorders a particle's vertices (and their velocities) by angle about the
// centroid, the order fitness() evaluates them in, so that attraction
// towards another position pulls matching vertices together.
void canonical_order(Particle& p) {
  const std::size_t k = p.position.size() / 2;
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    cx += p.position[2 * i];
    cy += p.position[2 * i + 1];
  }
  cx /= static_cast<double>(k);
  cy /= static_cast<double>(k);
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::atan2(p.position[2 * a + 1] - cy, p.position[2 * a] - cx) <
           std::atan2(p.position[2 * b + 1] - cy, p.position[2 * b] - cx);
  });
  std::vector<double> pos(2 * k), vel(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    pos[2 * i] = p.position[2 * idx[i]];
    pos[2 * i + 1] = p.position[2 * idx[i] + 1];
    vel[2 * i] = p.velocity[2 * idx[i]];
    vel[2 * i + 1] = p.velocity[2 * idx[i] + 1];
  }
  p.position = std::move(pos);
  p.velocity = std::move(vel);
}

}  // namespace

FitResult fit_polygon(const PolygonMask& mask, const PsoConfig& cfg) {
  cfg.validate();
  if (mask.empty_foreground()) throw Error(ErrorCode::kEmptyMask, "cannot fit a polygon to an empty mask");

  const int dims = 2 * cfg.k;
  const double canvas_w = mask.width();
  const double canvas_h = mask.height();
  const double diagonal = std::hypot(canvas_w, canvas_h);
  const double vmax = cfg.velocity_clamp * diagonal;
  const PixelBox box = foreground_box(mask);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, cfg.init_jitter * diagonal);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto clamp_position = [&](std::vector<double>& pos) {
    for (int d = 0; d < dims; ++d) pos[d] = std::clamp(pos[d], 0.0, (d % 2 == 0) ? canvas_w : canvas_h);
  };

  std::vector<Particle> swarm(cfg.swarm_size);
  std::vector<double> global_best;
  double global_fitness = -1.0;
  for (int i = 0; i < cfg.swarm_size; ++i) {
    Particle& p = swarm[i];
    p.position = box_polygon(box, cfg.k, i);
    if (i > 0) {
      for (double& v : p.position) v += jitter(rng);
    }
    clamp_position(p.position);
    p.velocity.assign(dims, 0.0);
    p.best_position = p.position;
    p.best_fitness = fitness(p.position, mask);
    if (p.best_fitness > global_fitness) {
      global_fitness = p.best_fitness;
      global_best = p.best_position;
    }
  }

  FitResult result;
  result.best_history.reserve(cfg.iterations + 1);
  result.best_history.push_back(global_fitness);
  const int n = cfg.swarm_size;
  std::vector<std::size_t> leader(static_cast<std::size_t>(n));
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // Social attractor: the best personal best within the ring neighbourhood
    // (the whole swarm when neighborhood is 0).
    for (int i = 0; i < n; ++i) {
      std::size_t best = static_cast<std::size_t>(i);
      if (cfg.neighborhood == 0) {
        for (int j = 0; j < n; ++j) {
          if (swarm[static_cast<std::size_t>(j)].best_fitness > swarm[best].best_fitness) best = static_cast<std::size_t>(j);
        }
      } else {
        for (int o = -cfg.neighborhood; o <= cfg.neighborhood; ++o) {
          const auto j = static_cast<std::size_t>(((i + o) % n + n) % n);
          if (swarm[j].best_fitness > swarm[best].best_fitness) best = j;
        }
      }
      leader[static_cast<std::size_t>(i)] = best;
    }
    const std::vector<Particle> snapshot = swarm;
    for (std::size_t i = 0; i < swarm.size(); ++i) {
      Particle& p = swarm[i];
      const std::vector<double>& social = snapshot[leader[i]].best_position;
      for (int d = 0; d < dims; ++d) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        double v = cfg.inertia * p.velocity[d] + cfg.cognitive * r1 * (p.best_position[d] - p.position[d]) +
                   cfg.social * r2 * (social[d] - p.position[d]);
        p.velocity[d] = std::clamp(v, -vmax, vmax);
        p.position[d] += p.velocity[d];
      }
      clamp_position(p.position);
      canonical_order(p);
    }
    // Fitness evaluations are independent; the global-best update below is
    // the only synchronization point of an iteration.
    for (auto& p : swarm) {
      const double f = fitness(p.position, mask);
      if (f > p.best_fitness) {
        p.best_fitness = f;
        p.best_position = p.position;
      }
    }
    for (const auto& p : swarm) {
      if (p.best_fitness > global_fitness) {
        global_fitness = p.best_fitness;
        global_best = p.best_position;
      }
    }
    result.best_history.push_back(global_fitness);
  }

  result.path = PathParams::from_points(normalize_vertices(to_points(global_best)),
                                        static_cast<std::size_t>(std::max(cfg.k_max, cfg.k)));
  result.iou = global_fitness;
  return result;
}

PolygonMask largest_component(const PolygonMask& mask, std::size_t* component_count) {
  std::vector<PolygonMask> parts = connected_components(mask);
  if (component_count) *component_count = parts.size();
  if (parts.empty()) return PolygonMask(mask.width(), mask.height());
  std::size_t best = 0;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].count() > parts[best].count()) best = i;
  }
  return std::move(parts[best]);
}

SceneFit fit_scene(std::span<const PolygonMask> masks, std::span<const std::string> captions, const PsoConfig& cfg) {
  cfg.validate();
  if (masks.size() != captions.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(masks.size()) + " masks but " +
                                                std::to_string(captions.size()) + " captions");
  }
  SceneFit out;
  if (!masks.empty()) {
    out.scene.canvas_w = masks[0].width();
    out.scene.canvas_h = masks[0].height();
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].empty_foreground()) {
      throw Error(ErrorCode::kEmptyMask, "mask " + std::to_string(i) + " is empty").at_index(i);
    }
    if (masks[i].width() != out.scene.canvas_w || masks[i].height() != out.scene.canvas_h) {
      throw Error(ErrorCode::kDimensionMismatch, "mask " + std::to_string(i) + " has a different size").at_index(i);
    }
    std::size_t components = 0;
    const PolygonMask target = largest_component(masks[i], &components);
    if (components > 1) {
      out.warnings.push_back("mask " + std::to_string(i) + " has " + std::to_string(components) +
                             " components; fitting the largest");
    }
    FitResult best;
    int best_k = 0;
    for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
      PsoConfig local = cfg;
      local.k = k;
      local.seed = mix_seed(cfg.seed, i, static_cast<std::uint64_t>(k));
      FitResult fit = fit_polygon(target, local);
      if (best_k == 0 || fit.iou > best.iou) {
        best = std::move(fit);
        best_k = k;
      }
    }
    PathClipPrimitive primitive;
    primitive.path = std::move(best.path);
    primitive.appearance =
        AppearanceDescription::from_text(captions[i].find_first_not_of(" \t\r\n") == std::string::npos ? "object"
                                                                                                      : captions[i]);
    out.scene.primitives.push_back(std::move(primitive));
    out.ious.push_back(best.iou);
    out.chosen_k.push_back(best_k);
  }
  return out;
}

}  // namespace pathclip
