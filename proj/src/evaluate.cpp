// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/evaluate.hpp"

#include <algorithm>
#include <tuple>

#include "json.hpp"
#include "pathclip/error.hpp"
#include "pathclip/synthetic.hpp"

namespace pathclip {

int quantize_pixel(std::span<const double> rgb) {
  double best = rgb[0] * rgb[0] + rgb[1] * rgb[1] + rgb[2] * rgb[2];  // distance to black
  int best_index = -1;
  const auto& colors = palette();
  for (std::size_t i = 0; i < colors.size(); ++i) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += (rgb[c] - colors[i].rgb[c]) * (rgb[c] - colors[i].rgb[c]);
    if (d < best) {
      best = d;
      best_index = static_cast<int>(i);
    }
  }
  return best_index;
}

std::vector<DetectedRegion> detect_regions(const Tensor& image, std::size_t min_area) {
  if (image.channels() != 3) throw Error(ErrorCode::kShapeMismatch, "detection expects an RGB image");
  std::vector<int> labels(static_cast<std::size_t>(image.positions()));
  for (int p = 0; p < image.positions(); ++p) labels[p] = quantize_pixel(image.at(p));

  std::vector<DetectedRegion> out;
  const auto& colors = palette();
  for (std::size_t ci = 0; ci < colors.size(); ++ci) {
    PolygonMask layer(image.width(), image.height());
    for (std::size_t p = 0; p < labels.size(); ++p) layer.cells()[p] = labels[p] == static_cast<int>(ci) ? 1 : 0;
    for (auto& part : connected_components(layer)) {
      if (part.count() >= min_area) out.push_back({colors[ci].name, std::move(part)});
    }
  }
  return out;
}

LayoutAdherenceReport evaluate_layout_adherence(const Tensor& image, const LayoutScene& scene,
                                                const EvaluationOptions& options) {
  if (image.width() != scene.canvas_w || image.height() != scene.canvas_h) {
    throw Error(ErrorCode::kDimensionMismatch, "image and scene canvas sizes differ");
  }
  std::vector<std::string> wanted;
  std::vector<PolygonMask> truth;
  for (const auto& prim : scene.primitives) {
    wanted.push_back(primitive_color(prim).name);
    truth.push_back(rasterize(prim, scene.canvas_w, scene.canvas_h));
  }

  LayoutAdherenceReport report;
  report.regions = detect_regions(image, options.min_region_area);

  std::vector<std::tuple<double, int, int>> candidates;
  for (std::size_t r = 0; r < report.regions.size(); ++r) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (report.regions[r].color != wanted[j]) continue;
      const double iou = polygon_iou(report.regions[r].mask, truth[j]);
      if (iou >= options.iou_tolerance) candidates.emplace_back(iou, static_cast<int>(r), static_cast<int>(j));
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<bool> region_used(report.regions.size(), false), prim_used(truth.size(), false);
  for (const auto& [iou, r, j] : candidates) {
    if (region_used[r] || prim_used[j]) continue;
    region_used[r] = prim_used[j] = true;
    report.matches.push_back({r, j, iou});
  }

  report.true_positives = static_cast<int>(report.matches.size());
  report.false_positives = static_cast<int>(report.regions.size()) - report.true_positives;
  report.false_negatives = static_cast<int>(truth.size()) - report.true_positives;
  report.zero_detections = report.regions.empty();
  const int tp = report.true_positives;
  report.precision = report.regions.empty() ? 0.0 : static_cast<double>(tp) / report.regions.size();
  report.recall = truth.empty() ? 0.0 : static_cast<double>(tp) / truth.size();
  const int denom = tp + report.false_positives + report.false_negatives;
  report.accuracy = denom == 0 ? 0.0 : static_cast<double>(tp) / denom;
  return report;
}

std::string report_to_json(const LayoutAdherenceReport& report) {
  nlohmann::json j;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["accuracy"] = report.accuracy;
  j["true_positives"] = report.true_positives;
  j["false_positives"] = report.false_positives;
  j["false_negatives"] = report.false_negatives;
  j["zero_detections"] = report.zero_detections;
  j["regions"] = nlohmann::json::array();
  for (const auto& r : report.regions) j["regions"].push_back({{"color", r.color}, {"area", r.mask.count()}});
  j["matches"] = nlohmann::json::array();
  for (const auto& m : report.matches) {
    j["matches"].push_back({{"region", m.region}, {"primitive", m.primitive}, {"iou", m.iou}});
  }
  return j.dump(2);
}

}  // namespace pathclip
