// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pathclip/error.hpp"

namespace pathclip {

PathParams PathParams::from_points(std::vector<Point> points, std::size_t max_vertices) {
  if (points.size() < kMinVertices || points.size() > max_vertices) {
    throw Error(ErrorCode::kVertexCountOutOfRange,
                "polygon has " + std::to_string(points.size()) + " vertices, expected " +
                    std::to_string(kMinVertices) + ".." + std::to_string(max_vertices));
  }
  PathParams params;
  params.box = bounding_box(points);
  params.clip_points = std::move(points);
  return params;
}

std::string AppearanceDescription::text() const {
  std::string out;
  for (const auto& token : tokens) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

AppearanceDescription AppearanceDescription::from_text(const std::string& text,
                                                       std::size_t max_tokens) {
  AppearanceDescription desc;
  std::istringstream in(text);
  std::string token;
  while (in >> token) desc.tokens.push_back(token);
  if (desc.tokens.empty()) throw Error(ErrorCode::kEmptyInput, "appearance description is empty");
  if (desc.tokens.size() > max_tokens) {
    throw Error(ErrorCode::kInvalidArgument,
                "appearance description has more than " + std::to_string(max_tokens) + " tokens");
  }
  return desc;
}

PolygonMask::PolygonMask(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "mask dimensions must be positive");
  }
  cells_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t PolygonMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

Box bounding_box(std::span<const Point> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::kDegeneratePolygon, "bounding box needs at least 3 vertices");
  }
  double min_x = points[0].x, max_x = points[0].x;
  double min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double w = max_x - min_x;
  const double h = max_y - min_y;
  if (!(w > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::kDegeneratePolygon, "polygon has zero width or height");
  }
  return Box{(min_x + max_x) / 2.0, (min_y + max_y) / 2.0, w, h};
}

std::vector<Point> normalize_vertices(std::span<const Point> points) {
  std::vector<Point> out(points.begin(), points.end());
  if (out.empty()) return out;
  double cx = 0.0, cy = 0.0;
  for (const auto& p : out) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(out.size());
  cy /= static_cast<double>(out.size());
  // stable_sort keeps coincident-angle vertices in input order.
  std::stable_sort(out.begin(), out.end(), [cx, cy](const Point& a, const Point& b) {
    return std::atan2(a.y - cy, a.x - cx) < std::atan2(b.y - cy, b.x - cx);
  });
  return out;
}

double polygon_area(std::span<const Point> points) {
  double twice = 0.0;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

namespace {

// Crossing x-coordinate of edge (a, b) with the horizontal line at y. Both
// the scanline rasterizer and point_in_polygon use this exact expression so
// they agree bit-for-bit.
inline double edge_crossing(const Point& a, const Point& b, double y) {
  return (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
}

}  // namespace

bool point_in_polygon(std::span<const Point> polygon, double x, double y) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[i];
    const Point& b = polygon[j];
    if ((a.y > y) != (b.y > y) && x < edge_crossing(a, b, y)) inside = !inside;
  }
  return inside;
}

PolygonMask rasterize(std::span<const Point> points, int width, int height) {
  PolygonMask mask(width, height);
  const std::vector<Point> poly = normalize_vertices(points);
  if (poly.size() < 3 || !(polygon_area(poly) > 0.0)) {
    throw Error(ErrorCode::kDegeneratePolygon, "polygon has zero area");
  }
  const std::size_t n = poly.size();
  std::vector<double> crossings;
  crossings.reserve(n);
  for (int row = 0; row < height; ++row) {
    const double y = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      if ((poly[i].y > y) != (poly[j].y > y)) crossings.push_back(edge_crossing(poly[i], poly[j], y));
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    // A center is inside iff an odd number of crossings lie strictly right of it.
    std::size_t left = 0;  // crossings with value <= x
    for (int col = 0; col < width; ++col) {
      const double x = col + 0.5;
      while (left < crossings.size() && !(x < crossings[left])) ++left;
      if (((crossings.size() - left) & 1U) != 0) mask.set(col, row, true);
    }
  }
  return mask;
}

PolygonMask rasterize(const PathClipPrimitive& primitive, int width, int height) {
  return rasterize(primitive.path.clip_points, width, height);
}

double polygon_iou(const PolygonMask& a, const PolygonMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "IoU of masks with different dimensions");
  }
  std::size_t inter = 0, uni = 0;
  const auto ca = a.cells();
  const auto cb = b.cells();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    inter += static_cast<std::size_t>(ca[i] & cb[i]);
    uni += static_cast<std::size_t>(ca[i] | cb[i]);
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PathParams clamp_to_canvas(const PathParams& path, int canvas_w, int canvas_h) {
  std::vector<Point> points = path.clip_points;
  for (auto& p : points) {
    p.x = std::clamp(p.x, 0.0, static_cast<double>(canvas_w));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(canvas_h));
  }
  PathParams out;
  out.box = bounding_box(points);
  out.clip_points = std::move(points);
  return out;
}

std::vector<PolygonMask> connected_components(const PolygonMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  const auto cells = mask.cells();
  std::vector<int> label(mask.size(), -1);
  std::vector<PolygonMask> parts;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!cells[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(parts.size());
    PolygonMask part(w, h);
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      part.cells()[cur] = 1;
      const int cx = cur % w, cy = cur / w;
      const int nx[4] = {cx - 1, cx + 1, cx, cx};
      const int ny[4] = {cy, cy, cy - 1, cy + 1};
      for (int n = 0; n < 4; ++n) {
        if (nx[n] < 0 || ny[n] < 0 || nx[n] >= w || ny[n] >= h) continue;
        const int idx = ny[n] * w + nx[n];
        if (cells[idx] && label[idx] < 0) {
          label[idx] = id;
          stack.push_back(idx);
        }
      }
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace pathclip
