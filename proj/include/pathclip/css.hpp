// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Text form of a Path Clip primitive:
//
//   cat [cx: 32.00px, cy: 32.00px, w: 16.00px, h: 16.00px,
//        clip-path: polygon(24.00px 24.00px, 40.00px 24.00px, ...)]
//
// The appearance words precede the bracketed declaration block. Declarations
// may appear in any order; `clip path` is accepted as a spelling of
// `clip-path`. Every number carries a mandatory `px` suffix. The box fields
// are required but re-derived from the clip points on parse.

#pragma once

#include <string>
#include <string_view>

#include "pathclip/geometry.hpp"

namespace pathclip {

struct CssOptions {
  std::size_t max_vertices = kDefaultMaxVertices;
  std::size_t max_tokens = kDefaultMaxTokens;
};

PathClipPrimitive parse_css(std::string_view text, const CssOptions& options = {});

/// Canonical single-line form with two decimal places.
std::string serialize_css(const PathClipPrimitive& primitive);

/// Fixed two-decimal rendering used by serialize_css (never "-0.00").
std::string format_px(double value);

}  // namespace pathclip
