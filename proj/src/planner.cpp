// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/planner.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

#include "pathclip/css.hpp"
#include "pathclip/error.hpp"
#include "pathclip/io.hpp"

namespace pathclip {

const std::string& default_instruction() {
  static const std::string text =
      "You are a layout planner for an image generator. Split the request into the separate "
      "objects it mentions. For every object write one line: a short appearance description that "
      "starts with the category name, followed by a bracketed block giving the polygon center "
      "(cx, cy), its width and height (w, h), and the polygon vertices as absolute pixel "
      "coordinates in clip-path: polygon(...). Every number ends in px. Use 4 to 6 vertices per "
      "polygon and keep all vertices inside the canvas.";
  return text;
}

std::vector<Exemplar> default_exemplars() {
  return {
      {"a red quad on the left and a blue pentagon on the right",
       "quad red [cx: 8.00px, cy: 16.00px, w: 10.00px, h: 12.00px, clip-path: polygon(3.00px 10.00px, "
       "13.00px 10.00px, 13.00px 22.00px, 3.00px 22.00px)]\n"
       "pentagon blue [cx: 23.50px, cy: 16.00px, w: 11.00px, h: 10.00px, clip-path: polygon(23.00px "
       "11.00px, 29.00px 15.00px, 27.00px 21.00px, 20.00px 21.00px, 18.00px 15.00px)]"},
      {"a green hexagon in the middle",
       "hexagon green [cx: 16.00px, cy: 16.00px, w: 14.00px, h: 12.00px, clip-path: polygon(12.00px "
       "10.00px, 20.00px 10.00px, 23.00px 16.00px, 20.00px 22.00px, 12.00px 22.00px, 9.00px 16.00px)]"},
  };
}

std::string build_prompt(const std::string& user_text, const std::vector<Exemplar>& exemplars,
                         const std::string& instruction) {
  if (instruction.empty()) throw Error(ErrorCode::kInvalidArgument, "task instruction is empty");
  if (exemplars.empty()) throw Error(ErrorCode::kEmptyExemplars, "at least one exemplar is required");
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    try {
      // Canvas size does not matter for validation; clamping is skipped.
      std::istringstream lines(exemplars[i].output_layout);
      std::string line;
      std::size_t parsed = 0;
      while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        parse_css(line);
        ++parsed;
      }
      if (parsed == 0) throw Error(ErrorCode::kInvalidExemplar, "exemplar output is empty");
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidExemplar,
                  "exemplar " + std::to_string(i + 1) + " output does not parse: " + e.what())
          .at_index(i);
    }
  }
  std::string prompt = instruction;
  prompt += "\n\n";
  for (const auto& ex : exemplars) {
    prompt += "Input: " + ex.input_prompt + "\n";
    prompt += "Output: " + ex.output_layout + "\n\n";
  }
  prompt += "Input: " + user_text + "\nOutput:";
  return prompt;
}

std::string build_prompt(const PromptTemplate& tmpl) {
  return build_prompt(tmpl.inference_condition, tmpl.exemplars, tmpl.task_instruction);
}

std::string format_layout(const LayoutScene& scene) {
  std::string out;
  for (const auto& p : scene.primitives) {
    if (!out.empty()) out += '\n';
    out += serialize_css(p);
  }
  return out;
}

namespace {

// Appearance words preceding a block, minus list markers and labels.
std::string clean_block_name(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  std::vector<std::string> words;
  std::string word;
  while (in >> word) words.push_back(word);
  std::size_t first = 0;
  auto is_marker = [](const std::string& w) {
    if (w == "-" || w == "*" || w == "•") return true;
    if (w.back() == ':') return true;  // "Output:", "Objects:"
    std::size_t i = 0;
    while (i < w.size() && std::isdigit(static_cast<unsigned char>(w[i]))) ++i;
    return i > 0 && i + 1 == w.size() && (w[i] == '.' || w[i] == ')');
  };
  while (first < words.size() && is_marker(words[first])) ++first;
  std::string name;
  for (std::size_t i = first; i < words.size(); ++i) {
    if (!name.empty()) name += ' ';
    name += words[i];
  }
  return name;
}

}  // namespace

LayoutScene parse_response(const std::string& text, int canvas_w, int canvas_h, const std::string& user_prompt) {
  LayoutScene scene;
  scene.canvas_w = canvas_w;
  scene.canvas_h = canvas_h;
  scene.global_caption = user_prompt;

  std::size_t name_start = 0;
  std::size_t block_no = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find('[', pos);
    if (open == std::string::npos) break;
    ++block_no;
    // The name starts after the last line break (or separator) before '['.
    std::size_t line_start = text.find_last_of("\n;", open);
    line_start = (line_start == std::string::npos || line_start < name_start) ? name_start : line_start + 1;
    const std::string name = clean_block_name(std::string_view(text).substr(line_start, open - line_start));

    std::size_t close = std::string::npos;
    for (std::size_t i = open + 1; i < text.size(); ++i) {
      if (text[i] == ']') {
        close = i;
        break;
      }
      if (text[i] == '[' || text[i] == '\n') break;
    }
    if (close == std::string::npos) {
      throw Error(ErrorCode::kUnbalancedBrackets, "block " + std::to_string(block_no) + " has no closing ']'")
          .at_index(block_no)
          .at_offset(open);
    }
    const std::string block = name + " " + text.substr(open, close - open + 1);
    try {
      PathClipPrimitive primitive = parse_css(block);
      primitive.path = clamp_to_canvas(primitive.path, canvas_w, canvas_h);
      scene.primitives.push_back(std::move(primitive));
    } catch (const Error& e) {
      throw Error(e.code(), "block " + std::to_string(block_no) + ": " + e.what()).at_index(block_no);
    }
    pos = close + 1;
    name_start = pos;
  }
  if (scene.primitives.empty()) throw Error(ErrorCode::kNoPrimitivesFound, "response contains no layout blocks");
  return scene;
}

std::vector<SceneWarning> validate_scene(const LayoutScene& scene, double overlap_threshold) {
  std::vector<SceneWarning> warnings;
  const auto& prims = scene.primitives;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    for (const auto& p : prims[i].path.clip_points) {
      if (p.x < 0.0 || p.y < 0.0 || p.x > scene.canvas_w || p.y > scene.canvas_h) {
        warnings.push_back({SceneWarning::Kind::kOutOfCanvas, i, i, 0.0,
                            "primitive " + std::to_string(i) + " has a vertex outside the canvas"});
        break;
      }
    }
  }
  std::vector<std::optional<PolygonMask>> masks(prims.size());
  if (scene.canvas_w > 0 && scene.canvas_h > 0) {
    for (std::size_t i = 0; i < prims.size(); ++i) {
      try {
        masks[i] = rasterize(prims[i], scene.canvas_w, scene.canvas_h);
      } catch (const Error&) {
        // Degenerate primitives cannot overlap anything.
      }
    }
  }
  for (std::size_t i = 0; i < prims.size(); ++i) {
    for (std::size_t j = i + 1; j < prims.size(); ++j) {
      if (masks[i] && masks[j]) {
        const double iou = polygon_iou(*masks[i], *masks[j]);
        if (iou > overlap_threshold) {
          warnings.push_back({SceneWarning::Kind::kOverlap, i, j, iou,
                              "primitives " + std::to_string(i) + " and " + std::to_string(j) + " overlap (IoU " +
                                  std::to_string(iou) + ")"});
        }
      }
      if (prims[i].appearance == prims[j].appearance) {
        warnings.push_back({SceneWarning::Kind::kDuplicate, i, j, 0.0,
                            "primitives " + std::to_string(i) + " and " + std::to_string(j) +
                                " share the appearance '" + prims[i].appearance.text() + "'"});
      }
    }
  }
  return warnings;
}

std::string prompt_digest(const std::string& prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kBackendFailure, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0x0F];
  }
  return out;
}

std::string FixtureBackend::complete(const std::string& prompt) {
  const auto path = dir_ / (prompt_digest(prompt) + ".txt");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kFixtureNotFound, "no fixture '" + path.string() + "' for this prompt");
  }
  return read_text_file(path);
}

void FixtureBackend::record(const std::string& prompt, const std::string& response) const {
  std::filesystem::create_directories(dir_);
  write_text_file(dir_ / (prompt_digest(prompt) + ".txt"), response);
}

RemoteOptions RemoteOptions::from_environment() {
  RemoteOptions options;
  if (const char* url = std::getenv("PATHCLIP_PLANNER_URL")) options.url = url;
  if (const char* key = std::getenv("PATHCLIP_PLANNER_API_KEY")) options.api_key = key;
  return options;
}

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)), in_flight_(std::max(1, options_.max_in_flight)) {
  const std::string& url = options_.url;
  const std::size_t scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "planner URL '" + url + "' must look like http://host[:port]/path");
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (options_.max_in_flight < 1 || options_.max_in_flight > 1024) {
    throw Error(ErrorCode::kConfig, "max_in_flight must be in 1..1024");
  }
}

std::string RemoteBackend::complete(const std::string& prompt) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  const nlohmann::json body = {{"prompt", prompt}, {"max_tokens", options_.max_tokens}};
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    auto result = client.Post(path_, headers, body.dump(), "application/json");
    if (!result) {
      last_error = "request failed: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status != 200) {
      last_error = "HTTP status " + std::to_string(result->status);
      if (result->status >= 400 && result->status < 500) break;  // client errors are not retried
      continue;
    }
    try {
      const auto reply = nlohmann::json::parse(result->body);
      return reply.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kBackendFailure, std::string("malformed planner reply: ") + e.what());
    }
  }
  throw Error(ErrorCode::kBackendFailure, "planner request to '" + options_.url + "' failed: " + last_error);
}

std::unique_ptr<PlannerBackend> make_backend(const std::string& kind, const std::filesystem::path& fixtures,
                                             const RemoteOptions& remote) {
  if (kind == "mock") return std::make_unique<FixtureBackend>(fixtures);
  if (kind == "remote") return std::make_unique<RemoteBackend>(remote);
  throw Error(ErrorCode::kConfig, "planner backend must be 'mock' or 'remote', got '" + kind + "'");
}

LayoutScene plan_scene(PlannerBackend& backend, const std::string& user_text, int canvas_w, int canvas_h,
                       const std::vector<Exemplar>& exemplars, const std::string& instruction) {
  const std::string prompt = build_prompt(user_text, exemplars, instruction);
  return parse_response(backend.complete(prompt), canvas_w, canvas_h, user_text);
}

}  // namespace pathclip
