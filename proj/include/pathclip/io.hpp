// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// File formats: scene JSON, binary PGM masks, binary PPM images.

#pragma once

#include <filesystem>
#include <string>

#include "pathclip/geometry.hpp"
#include "pathclip/tensor.hpp"

namespace pathclip {

/// {"canvas": [w, h], "caption": "...", "objects": [{"css": "...", "appearance": "..."}]}
std::string scene_to_json(const LayoutScene& scene, int indent = 2);
LayoutScene scene_from_json(const std::string& text);

void save_scene(const LayoutScene& scene, const std::filesystem::path& path);
LayoutScene load_scene(const std::filesystem::path& path);

/// P5, maxval 255; 0 = background, 255 = foreground. Loading treats any
/// nonzero sample as foreground.
void save_pgm(const PolygonMask& mask, const std::filesystem::path& path);
PolygonMask load_pgm(const std::filesystem::path& path);

/// P6, maxval 255. Tensors hold RGB in [0, 1] (3 channels).
void save_ppm(const Tensor& image, const std::filesystem::path& path);
Tensor load_ppm(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pathclip
