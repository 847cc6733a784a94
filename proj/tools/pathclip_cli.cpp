// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C interface.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pathclip/pathclip.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitBadInput = 2;

struct Failure {
  pc_status status;
  std::string stage;
};

void check(pc_status status, const std::string& stage) {
  if (status != PC_OK) throw Failure{status, stage};
}

struct ConfigDeleter {
  void operator()(pc_config* c) const { pc_config_free(c); }
};
struct SceneDeleter {
  void operator()(pc_scene* s) const { pc_scene_free(s); }
};
struct ModelDeleter {
  void operator()(pc_model* m) const { pc_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { pc_string_free(s); }
};
using ConfigPtr = std::unique_ptr<pc_config, ConfigDeleter>;
using ScenePtr = std::unique_ptr<pc_scene, SceneDeleter>;
using ModelPtr = std::unique_ptr<pc_model, ModelDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

void print_progress(const char* stage, int step, int total, double value, void*) {
  if (total > 0) {
    std::fprintf(stderr, "[%s] %d/%d %.6g\n", stage, step, total, value);
  } else {
    std::fprintf(stderr, "[%s]\n", stage);
  }
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
};

ConfigPtr make_config(const Globals& g) {
  pc_config* raw = nullptr;
  check(g.config_path.empty() ? pc_config_new(&raw) : pc_config_load(g.config_path.c_str(), &raw), "config");
  ConfigPtr cfg(raw);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "config: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{PC_CONFIG, "config"};
    }
    check(pc_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "config");
  }
  if (g.seed) check(pc_config_set(cfg.get(), "seed", std::to_string(*g.seed).c_str()), "config");
  check(pc_config_validate(cfg.get()), "config");
  return cfg;
}

std::uint64_t config_seed(const pc_config* cfg) {
  char* raw = nullptr;
  check(pc_config_get(cfg, "seed", &raw), "config");
  StringPtr s(raw);
  return std::stoull(s.get());
}

std::string out_path(const Globals& g, const std::string& name) {
  std::filesystem::create_directories(g.out);
  return (std::filesystem::path(g.out) / name).string();
}

// Scene output: --out naming a .json file is used as is, otherwise it is a directory.
std::string scene_out_path(const Globals& g) {
  const std::filesystem::path out(g.out);
  if (out.extension() == ".json") {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    return out.string();
  }
  return out_path(g, "scene.json");
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

ScenePtr load_scene(const std::string& path) {
  pc_scene* raw = nullptr;
  check(pc_scene_load(path.c_str(), &raw), "scene");
  return ScenePtr(raw);
}

ModelPtr load_or_train(pc_config* cfg, const std::string& weights, const Globals& g) {
  pc_model* raw = nullptr;
  if (!weights.empty()) {
    check(pc_model_load(weights.c_str(), &raw), "model");
  } else {
    char* w = nullptr;
    check(pc_config_get(cfg, "paths.weights", &w), "config");
    StringPtr path(w);
    if (std::string(path.get()).empty()) {
      std::fprintf(stderr, "model: no weights given; training a toy denoiser\n");
      check(pc_train(cfg, config_seed(cfg), print_progress, nullptr, &raw), "train");
      ModelPtr model(raw);
      check(pc_model_save(model.get(), out_path(g, "model.bin").c_str()), "train");
      return model;
    }
    check(pc_model_load(path.get(), &raw), "model");
  }
  return ModelPtr(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathclip: layout planning, polygon fitting and guided toy diffusion"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "seed overriding the configuration");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "configuration override key=value (repeatable)");

  std::vector<std::string> masks, captions;
  std::optional<int> fit_k;
  auto* fit = app.add_subcommand("fit", "fit one polygon per PGM instance mask");
  std::vector<std::string> mask_flags;
  fit->add_option("masks", masks, "binary PGM masks");
  fit->add_option("--mask", mask_flags, "binary PGM mask (repeatable)");
  fit->add_option("--caption", captions, "appearance text per mask, in order");
  fit->add_option("--k", fit_k, "fixed vertex count");

  std::string prompt, planner, fixtures;
  auto* plan = app.add_subcommand("plan", "plan a scene from a text prompt");
  plan->add_option("prompt", prompt, "user prompt")->required();
  plan->add_option("--planner", planner, "mock | remote");
  plan->add_option("--fixtures", fixtures, "fixture directory for the mock planner");

  std::string scene_path, weights, condition, image;
  auto* generate = app.add_subcommand("generate", "guided generation for a scene");
  generate->add_option("--scene", scene_path, "scene JSON")->required();
  generate->add_option("--weights", weights, "toy model weights");
  generate->add_option("--condition", condition, "spatial condition PPM");

  auto* invert = app.add_subcommand("invert", "DDIM inversion of an image");
  invert->add_option("--image", image, "PPM image")->required();
  invert->add_option("--weights", weights, "toy model weights");
  invert->add_option("--scene", scene_path, "scene used as conditioning");

  auto* evaluate = app.add_subcommand("evaluate", "layout adherence of an image, or of a model over held-out scenes");
  evaluate->add_option("--image", image, "generated PPM image");
  evaluate->add_option("--scene", scene_path, "scene JSON for --image");
  evaluate->add_option("--weights", weights, "evaluate this model over held-out synthetic scenes");

  auto* demo = app.add_subcommand("demo", "end-to-end demo bundle");
  auto* train = app.add_subcommand("train", "train the toy denoiser");
  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitRuntime;
  }

  try {
    if (fit->parsed() && fit_k) {
      g.overrides.push_back("pso.k=" + std::to_string(*fit_k));
    }
    if (plan->parsed()) {
      if (!planner.empty()) g.overrides.push_back("planner.backend=" + planner);
      if (!fixtures.empty()) g.overrides.push_back("planner.fixtures=" + fixtures);
    }
    ConfigPtr cfg = make_config(g);

    if (fit->parsed()) {
      masks.insert(masks.end(), mask_flags.begin(), mask_flags.end());
      if (masks.empty()) {
        std::fprintf(stderr, "fit: no mask files given\n");
        return kExitRuntime;
      }
      if (fit_k) {
        const std::string k = std::to_string(*fit_k);
        check(pc_config_set(cfg.get(), "pso.k_min", k.c_str()), "config");
        check(pc_config_set(cfg.get(), "pso.k_max", k.c_str()), "config");
      }
      if (!captions.empty() && captions.size() != masks.size()) {
        std::fprintf(stderr, "fit: %zu masks but %zu captions\n", masks.size(), captions.size());
        return kExitBadInput;
      }
      std::vector<const char*> mp, cp;
      for (const auto& m : masks) mp.push_back(m.c_str());
      for (const auto& c : captions) cp.push_back(c.c_str());
      std::vector<double> ious(masks.size());
      pc_scene* raw = nullptr;
      check(pc_fit(cfg.get(), mp.data(), captions.empty() ? nullptr : cp.data(), mp.size(), &raw, ious.data()), "fit");
      ScenePtr scene(raw);
      const std::string path = scene_out_path(g);
      check(pc_scene_save(scene.get(), path.c_str()), "fit");
      for (std::size_t i = 0; i < ious.size(); ++i) {
        std::printf("{\"mask\": \"%s\", \"iou\": %.6f}\n", json_escape(masks[i]).c_str(), ious[i]);
      }
      std::fprintf(stderr, "scene written to %s\n", path.c_str());
    } else if (plan->parsed()) {
      pc_scene* raw = nullptr;
      check(pc_plan(cfg.get(), prompt.c_str(), &raw), "plan");
      ScenePtr scene(raw);
      const std::string path = scene_out_path(g);
      check(pc_scene_save(scene.get(), path.c_str()), "plan");
      char* json = nullptr;
      check(pc_scene_to_json(scene.get(), &json), "plan");
      StringPtr text(json);
      std::printf("%s\n", text.get());
    } else if (generate->parsed()) {
      ScenePtr scene = load_scene(scene_path);
      ModelPtr model = load_or_train(cfg.get(), weights, g);
      const std::string img = out_path(g, "generated.ppm");
      const std::string diag = out_path(g, "diagnostics.jsonl");
      check(pc_generate(model.get(), cfg.get(), scene.get(), condition.empty() ? nullptr : condition.c_str(),
                        config_seed(cfg.get()), img.c_str(), diag.c_str(), print_progress, nullptr),
            "generate");
      std::printf("image written to %s\ndiagnostics written to %s\n", img.c_str(), diag.c_str());
    } else if (invert->parsed()) {
      ModelPtr model = load_or_train(cfg.get(), weights, g);
      ScenePtr scene;
      if (!scene_path.empty()) scene = load_scene(scene_path);
      double err = 0.0;
      std::filesystem::create_directories(g.out);
      check(pc_invert(model.get(), cfg.get(), scene.get(), image.c_str(), g.out.c_str(), &err), "invert");
      std::printf("round-trip relative L2 %.6g\ninversion written to %s\n", err, g.out.c_str());
    } else if (evaluate->parsed()) {
      char* json = nullptr;
      if (!image.empty()) {
        if (scene_path.empty()) {
          std::fprintf(stderr, "evaluate: --image requires --scene\n");
          return kExitRuntime;
        }
        ScenePtr scene = load_scene(scene_path);
        check(pc_evaluate(cfg.get(), image.c_str(), scene.get(), nullptr, nullptr, &json), "evaluate");
      } else {
        ModelPtr model = load_or_train(cfg.get(), weights, g);
        check(pc_evaluate_model(model.get(), cfg.get(), config_seed(cfg.get()), print_progress, nullptr, &json),
              "evaluate");
      }
      StringPtr text(json);
      const std::string path = out_path(g, "report.json");
      std::FILE* f = std::fopen(path.c_str(), "wb");
      if (f != nullptr) {
        std::fputs(text.get(), f);
        std::fclose(f);
      }
      std::printf("%s\n", text.get());
    } else if (demo->parsed()) {
      char* json = nullptr;
      check(pc_demo(cfg.get(), config_seed(cfg.get()), g.out.c_str(), print_progress, nullptr, &json), "demo");
      StringPtr text(json);
      std::printf("%s\n", text.get());
    } else if (train->parsed()) {
      pc_model* raw = nullptr;
      check(pc_train(cfg.get(), config_seed(cfg.get()), print_progress, nullptr, &raw), "train");
      ModelPtr model(raw);
      const std::string path = out_path(g, "model.bin");
      check(pc_model_save(model.get(), path.c_str()), "train");
      std::printf("weights written to %s\n", path.c_str());
    } else if (config_cmd->parsed()) {
      char* text = nullptr;
      check(pc_config_serialize(cfg.get(), &text), "config");
      StringPtr owned(text);
      std::fputs(owned.get(), stdout);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "%s failed: %s\n", f.stage.c_str(), pc_last_error());
    return pc_status_is_input_error(f.status) ? kExitBadInput : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
