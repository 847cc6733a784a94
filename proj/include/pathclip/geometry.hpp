// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Path Clip primitives: a polygon layout bound to an appearance description,
// plus the polygon geometry used everywhere else (rasterization, IoU, boxes).

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pathclip {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Box&, const Box&) = default;
};

inline constexpr std::size_t kMinVertices = 4;
inline constexpr std::size_t kDefaultMaxVertices = 6;
inline constexpr std::size_t kDefaultMaxTokens = 32;

/// Polygon path parameters. `box` is always re-derivable from `clip_points`
/// (absolute canvas pixels); constructors keep the two consistent.
struct PathParams {
  Box box;
  std::vector<Point> clip_points;

  /// Builds params from vertices, deriving the bounding box.
  /// Throws DegeneratePolygon for zero-width or zero-height input and
  /// VertexCountOutOfRange outside [kMinVertices, max_vertices].
  static PathParams from_points(std::vector<Point> points,
                                std::size_t max_vertices = kDefaultMaxVertices);

  friend bool operator==(const PathParams&, const PathParams&) = default;
};

struct AppearanceDescription {
  std::vector<std::string> tokens;

  const std::string& category() const { return tokens.front(); }
  std::string text() const;

  /// Splits on whitespace. Throws EmptyInput when no token is present.
  static AppearanceDescription from_text(const std::string& text,
                                         std::size_t max_tokens = kDefaultMaxTokens);

  friend bool operator==(const AppearanceDescription&, const AppearanceDescription&) = default;
};

struct PathClipPrimitive {
  PathParams path;
  AppearanceDescription appearance;

  friend bool operator==(const PathClipPrimitive&, const PathClipPrimitive&) = default;
};

struct LayoutScene {
  int canvas_w = 0;
  int canvas_h = 0;
  std::string global_caption;
  std::vector<PathClipPrimitive> primitives;

  friend bool operator==(const LayoutScene&, const LayoutScene&) = default;
};

/// Binary grid, row-major, 1 = inside.
class PolygonMask {
 public:
  PolygonMask() = default;
  PolygonMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return cells_.size(); }

  std::uint8_t at(int x, int y) const { return cells_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, bool on) { cells_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }

  std::span<const std::uint8_t> cells() const { return cells_; }
  std::span<std::uint8_t> cells() { return cells_; }

  std::size_t count() const;
  bool empty_foreground() const { return count() == 0; }

  friend bool operator==(const PolygonMask&, const PolygonMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Axis-aligned box of at least three vertices.
Box bounding_box(std::span<const Point> points);

/// Vertices sorted counter-clockwise by angle around their centroid.
std::vector<Point> normalize_vertices(std::span<const Point> points);

/// Shoelace area (absolute value).
double polygon_area(std::span<const Point> points);

/// Even-odd (crossing number) test; shared by the rasterizer and its oracle.
bool point_in_polygon(std::span<const Point> polygon, double x, double y);

/// Cell (i, j) is set iff its center (i + 0.5, j + 0.5) lies inside the
/// normalized polygon. Throws DegeneratePolygon for zero-area input.
PolygonMask rasterize(std::span<const Point> points, int width, int height);
PolygonMask rasterize(const PathClipPrimitive& primitive, int width, int height);

/// |a ∩ b| / |a ∪ b|, 0 for two empty masks.
double polygon_iou(const PolygonMask& a, const PolygonMask& b);

/// 4-connected foreground components in raster order of their first cell.
std::vector<PolygonMask> connected_components(const PolygonMask& mask);

/// Clamps every vertex into [0, w] x [0, h] and re-derives the box.
PathParams clamp_to_canvas(const PathParams& path, int canvas_w, int canvas_h);

}  // namespace pathclip
