// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Planning stage: prompt construction, text-completion backends, and
// conversion of completions into layout scenes.

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "pathclip/geometry.hpp"

namespace pathclip {

struct Exemplar {
  std::string input_prompt;
  std::string output_layout;  // one CSS primitive per line
};

struct PromptTemplate {
  std::string task_instruction;
  std::vector<Exemplar> exemplars;
  std::string inference_condition;
};

/// Shipped instruction text (original wording).
const std::string& default_instruction();

/// Built-in exemplars over a 32x32 canvas.
std::vector<Exemplar> default_exemplars();

/// instruction, then "Input: ...\nOutput: ..." blocks, then
/// "Input: <user_text>\nOutput:". Throws EmptyExemplars / InvalidExemplar.
std::string build_prompt(const std::string& user_text, const std::vector<Exemplar>& exemplars,
                         const std::string& instruction);
std::string build_prompt(const PromptTemplate& tmpl);

/// Renders a scene's primitives in exemplar output format.
std::string format_layout(const LayoutScene& scene);

/// Extracts every "name [ ... ]" block. Vertices are clamped to the canvas.
/// Errors from a block carry its 1-based index.
LayoutScene parse_response(const std::string& text, int canvas_w, int canvas_h,
                           const std::string& user_prompt = {});

struct SceneWarning {
  enum class Kind { kOutOfCanvas, kOverlap, kDuplicate };
  Kind kind;
  std::size_t first = 0;
  std::size_t second = 0;  // only for kOverlap / kDuplicate
  double iou = 0.0;        // only for kOverlap
  std::string message;
};

std::vector<SceneWarning> validate_scene(const LayoutScene& scene, double overlap_threshold = 0.7);

/// Lowercase hex SHA-256 of the prompt bytes; the fixture file key.
std::string prompt_digest(const std::string& prompt);

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Replays `<dir>/<prompt_digest(prompt)>.txt`.
class FixtureBackend final : public PlannerBackend {
 public:
  explicit FixtureBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string complete(const std::string& prompt) override;

  /// Writes a fixture so that `complete(prompt)` returns `response`.
  void record(const std::string& prompt, const std::string& response) const;

  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct RemoteOptions {
  std::string url;      // http(s)://host[:port]/path
  std::string api_key;  // sent as "Authorization: Bearer <key>" when non-empty
  int max_tokens = 512;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  int max_in_flight = 4;

  /// Reads PATHCLIP_PLANNER_URL and PATHCLIP_PLANNER_API_KEY.
  static RemoteOptions from_environment();
};

/// POST {"prompt": ..., "max_tokens": N} -> {"text": ...}.
class RemoteBackend final : public PlannerBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  std::string complete(const std::string& prompt) override;

 private:
  RemoteOptions options_;
  std::string scheme_host_port_;
  std::string path_;
  std::counting_semaphore<1024> in_flight_;
};

std::unique_ptr<PlannerBackend> make_backend(const std::string& kind, const std::filesystem::path& fixtures,
                                             const RemoteOptions& remote);

/// build_prompt -> backend -> parse_response.
LayoutScene plan_scene(PlannerBackend& backend, const std::string& user_text, int canvas_w, int canvas_h,
                       const std::vector<Exemplar>& exemplars = default_exemplars(),
                       const std::string& instruction = default_instruction());

}  // namespace pathclip
