// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "pathclip/css.hpp"
#include "pathclip/error.hpp"

namespace pathclip {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

std::string scene_to_json(const LayoutScene& scene, int indent) {
  json objects = json::array();
  for (const auto& p : scene.primitives) {
    objects.push_back({{"css", serialize_css(p)}, {"appearance", p.appearance.text()}});
  }
  json doc = {{"canvas", {scene.canvas_w, scene.canvas_h}},
              {"caption", scene.global_caption},
              {"objects", std::move(objects)}};
  return doc.dump(indent);
}

LayoutScene scene_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("scene is not valid JSON: ") + e.what());
  }
  try {
    LayoutScene scene;
    const auto& canvas = doc.at("canvas");
    if (!canvas.is_array() || canvas.size() != 2) throw Error(ErrorCode::kFormat, "'canvas' must be [w, h]");
    scene.canvas_w = canvas[0].get<int>();
    scene.canvas_h = canvas[1].get<int>();
    if (scene.canvas_w < 1 || scene.canvas_h < 1) throw Error(ErrorCode::kFormat, "canvas must be positive");
    scene.global_caption = doc.value("caption", std::string());
    std::size_t index = 0;
    for (const auto& obj : doc.at("objects")) {
      try {
        PathClipPrimitive p = parse_css(obj.at("css").get<std::string>());
        if (obj.contains("appearance")) {
          const std::string appearance = obj.at("appearance").get<std::string>();
          if (!appearance.empty()) p.appearance = AppearanceDescription::from_text(appearance);
        }
        scene.primitives.push_back(std::move(p));
      } catch (Error& e) {
        e.at_index(index);
        throw;
      }
      ++index;
    }
    return scene;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed scene: ") + e.what());
  }
}

void save_scene(const LayoutScene& scene, const std::filesystem::path& path) {
  write_text_file(path, scene_to_json(scene) + "\n");
}

LayoutScene load_scene(const std::filesystem::path& path) { return scene_from_json(read_text_file(path)); }

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader header;
  auto next_token = [&]() {
    std::string token;
    while (in) {
      const int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    in >> token;
    return token;
  };
  header.magic = next_token();
  try {
    header.width = std::stoi(next_token());
    header.height = std::stoi(next_token());
    header.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "malformed netpbm header in '" + path.string() + "'");
  }
  in.get();  // single whitespace before the raster
  if (header.width < 1 || header.height < 1 || header.maxval != 255) {
    throw Error(ErrorCode::kFormat, "'" + path.string() + "' must have positive size and maxval 255");
  }
  return header;
}

}  // namespace

void save_pgm(const PolygonMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  for (const auto cell : mask.cells()) out.put(cell ? static_cast<char>(255) : '\0');
}

PolygonMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  const NetpbmHeader header = read_header(in, path);
  if (header.magic != "P5") throw Error(ErrorCode::kFormat, "'" + path.string() + "' is not a P5 PGM");
  PolygonMask mask(header.width, header.height);
  std::vector<char> raster(mask.size());
  in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw Error(ErrorCode::kFormat, "'" + path.string() + "' is truncated");
  }
  auto cells = mask.cells();
  for (std::size_t i = 0; i < raster.size(); ++i) cells[i] = raster[i] != 0 ? 1 : 0;
  return mask;
}

void save_ppm(const Tensor& image, const std::filesystem::path& path) {
  if (image.channels() != 3) throw Error(ErrorCode::kShapeMismatch, "PPM needs a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  for (double v : image.values()) {
    const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
}

Tensor load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  const NetpbmHeader header = read_header(in, path);
  if (header.magic != "P6") throw Error(ErrorCode::kFormat, "'" + path.string() + "' is not a P6 PPM");
  Tensor image(header.height, header.width, 3);
  std::vector<unsigned char> raster(image.size());
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw Error(ErrorCode::kFormat, "'" + path.string() + "' is truncated");
  }
  for (std::size_t i = 0; i < raster.size(); ++i) image[i] = raster[i] / 255.0;
  return image;
}

}  // namespace pathclip
