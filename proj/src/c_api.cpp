// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/pathclip.h"

#include <cstring>
#include <new>
#include <string>

#include "json.hpp"
#include "pathclip/css.hpp"
#include "pathclip/error.hpp"
#include "pathclip/io.hpp"
#include "pathclip/pipeline.hpp"

struct pc_config {
  pathclip::PipelineConfig value;
};
struct pc_scene {
  pathclip::LayoutScene value;
};
struct pc_model {
  pathclip::ToyDenoiser value;
};

namespace {

thread_local std::string g_last_error;

pc_status fail(pc_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes and the message.
template <class F>
pc_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return PC_OK;
  } catch (const pathclip::Error& e) {
    return fail(static_cast<pc_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PC_INTERNAL, "out of memory");
  } catch (const nlohmann::json::exception& e) {
    return fail(PC_FORMAT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PC_IO, e.what());
  } catch (const std::exception& e) {
    return fail(PC_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw pathclip::Error(pathclip::ErrorCode::kInvalidArgument, what);
}

pathclip::ProgressFn wrap(pc_progress_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const std::string& stage, int step, int total, double value) {
    fn(stage.c_str(), step, total, value, user);
  };
}

}  // namespace

extern "C" {

const char* pc_version(void) { return "1.0.0"; }

const char* pc_status_name(pc_status status) {
  if (status == PC_INTERNAL) return "Internal";
  if (status < PC_OK || status > PC_EMPTY_INPUT) return "Unknown";
  return pathclip::error_code_name(static_cast<pathclip::ErrorCode>(status));
}

const char* pc_last_error(void) { return g_last_error.c_str(); }

int pc_status_is_input_error(pc_status status) {
  switch (status) {
    case PC_MISSING_FIELD:
    case PC_MALFORMED_NUMBER:
    case PC_VERTEX_COUNT_OUT_OF_RANGE:
    case PC_UNBALANCED_BRACKETS:
    case PC_UNEXPECTED_TOKEN:
    case PC_DEGENERATE_POLYGON:
    case PC_DIMENSION_MISMATCH:
    case PC_EMPTY_MASK:
    case PC_LENGTH_MISMATCH:
    case PC_NO_PRIMITIVES_FOUND:
    case PC_UNKNOWN_PALETTE_TOKEN:
    case PC_FORMAT:
    case PC_EMPTY_INPUT:
      return 1;
    default:
      return 0;
  }
}

void pc_string_free(char* s) { std::free(s); }

pc_status pc_config_new(pc_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new pc_config{};
  });
}

pc_status pc_config_load(const char* path, pc_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    auto cfg = pathclip::PipelineConfig::load(path);
    *out = new pc_config{std::move(cfg)};
  });
}

pc_status pc_config_parse(const char* text, pc_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "text and out are required");
    auto cfg = pathclip::PipelineConfig::parse(text);
    *out = new pc_config{std::move(cfg)};
  });
}

pc_status pc_config_set(pc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "cfg, key and value are required");
    cfg->value.set(key, value);
  });
}

pc_status pc_config_get(const pc_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "cfg, key and value are required");
    *value = copy_string(cfg->value.get(key));
  });
}

pc_status pc_config_serialize(const pc_config* cfg, char** text) {
  return guarded([&] {
    require(cfg != nullptr && text != nullptr, "cfg and text are required");
    *text = copy_string(cfg->value.serialize());
  });
}

pc_status pc_config_validate(const pc_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "cfg is null");
    cfg->value.validate();
  });
}

void pc_config_free(pc_config* cfg) { delete cfg; }

pc_status pc_css_canonicalize(const char* css, char** canonical) {
  return guarded([&] {
    require(css != nullptr && canonical != nullptr, "css and canonical are required");
    *canonical = copy_string(pathclip::serialize_css(pathclip::parse_css(css)));
  });
}

pc_status pc_scene_from_json(const char* json, pc_scene** out) {
  return guarded([&] {
    require(json != nullptr && out != nullptr, "json and out are required");
    auto scene = pathclip::scene_from_json(json);
    *out = new pc_scene{std::move(scene)};
  });
}

pc_status pc_scene_load(const char* path, pc_scene** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    auto scene = pathclip::load_scene(path);
    *out = new pc_scene{std::move(scene)};
  });
}

pc_status pc_scene_save(const pc_scene* scene, const char* path) {
  return guarded([&] {
    require(scene != nullptr && path != nullptr, "scene and path are required");
    pathclip::save_scene(scene->value, path);
  });
}

pc_status pc_scene_to_json(const pc_scene* scene, char** json) {
  return guarded([&] {
    require(scene != nullptr && json != nullptr, "scene and json are required");
    *json = copy_string(pathclip::scene_to_json(scene->value));
  });
}

pc_status pc_scene_primitive_count(const pc_scene* scene, size_t* count) {
  return guarded([&] {
    require(scene != nullptr && count != nullptr, "scene and count are required");
    *count = scene->value.primitives.size();
  });
}

void pc_scene_free(pc_scene* scene) { delete scene; }

pc_status pc_fit(const pc_config* cfg, const char* const* mask_paths, const char* const* captions, size_t count,
                 pc_scene** out, double* ious) {
  return guarded([&] {
    require(cfg != nullptr && out != nullptr, "cfg and out are required");
    require(count == 0 || mask_paths != nullptr, "mask_paths is null");
    std::vector<std::filesystem::path> paths;
    std::vector<std::string> caps;
    for (size_t i = 0; i < count; ++i) {
      require(mask_paths[i] != nullptr, "mask path is null");
      paths.emplace_back(mask_paths[i]);
      if (captions != nullptr) caps.emplace_back(captions[i] != nullptr ? captions[i] : "");
    }
    pathclip::SceneFit fit = pathclip::fit_mask_files(cfg->value, paths, caps);
    if (ious != nullptr) std::copy(fit.ious.begin(), fit.ious.end(), ious);
    *out = new pc_scene{std::move(fit.scene)};
  });
}

pc_status pc_plan(const pc_config* cfg, const char* prompt, pc_scene** out) {
  return guarded([&] {
    require(cfg != nullptr && prompt != nullptr && out != nullptr, "cfg, prompt and out are required");
    auto scene = pathclip::plan_prompt(cfg->value, prompt);
    *out = new pc_scene{std::move(scene)};
  });
}

pc_status pc_model_load(const char* path, pc_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    auto model = pathclip::ToyDenoiser::load(path);
    *out = new pc_model{std::move(model)};
  });
}

pc_status pc_model_save(const pc_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "model and path are required");
    model->value.save(path);
  });
}

pc_status pc_train(const pc_config* cfg, uint64_t seed, pc_progress_fn progress, void* user, pc_model** out) {
  return guarded([&] {
    require(cfg != nullptr && out != nullptr, "cfg and out are required");
    pathclip::TrainResult trained = pathclip::train_model(cfg->value, seed, wrap(progress, user));
    *out = new pc_model{std::move(trained.model)};
  });
}

void pc_model_free(pc_model* model) { delete model; }

pc_status pc_generate(const pc_model* model, const pc_config* cfg, const pc_scene* scene, const char* condition_ppm,
                      uint64_t seed, const char* out_ppm, const char* diagnostics_path, pc_progress_fn progress,
                      void* user) {
  return guarded([&] {
    require(model != nullptr && cfg != nullptr && scene != nullptr && out_ppm != nullptr,
            "model, cfg, scene and out_ppm are required");
    std::optional<pathclip::Tensor> condition;
    if (condition_ppm != nullptr) condition = pathclip::load_ppm(condition_ppm);
    const pathclip::Generation gen = pathclip::generate_image(model->value, cfg->value, scene->value,
                                                              condition ? &*condition : nullptr, seed,
                                                              wrap(progress, user));
    pathclip::save_ppm(gen.image, out_ppm);
    if (diagnostics_path != nullptr) {
      pathclip::write_text_file(diagnostics_path, pathclip::diagnostics_to_jsonl(gen.guided.log));
    }
  });
}

pc_status pc_invert(const pc_model* model, const pc_config* cfg, const pc_scene* scene, const char* image_ppm,
                    const char* out_dir, double* round_trip_error) {
  return guarded([&] {
    require(model != nullptr && cfg != nullptr && image_ppm != nullptr && out_dir != nullptr,
            "model, cfg, image_ppm and out_dir are required");
    const pathclip::Tensor image = pathclip::load_ppm(image_ppm);
    const pathclip::Inversion inv =
        pathclip::invert_image(model->value, cfg->value, image, scene != nullptr ? &scene->value : nullptr);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    pathclip::Trajectory noise;
    noise.steps.push_back({static_cast<int>(cfg->value.schedule_steps), inv.result.x_T, inv.result.x_T});
    pathclip::write_feature_dump(noise, dir / "noise.bin");
    pathclip::write_feature_dump(inv.result.trajectory, dir / "features.bin");
    pathclip::save_ppm(inv.reconstruction, dir / "reconstruction.ppm");
    nlohmann::json summary;
    std::vector<int> ts;
    for (const auto& s : inv.result.trajectory.steps) ts.push_back(s.t);
    summary["timesteps"] = ts;
    summary["round_trip_error"] = inv.round_trip_error;
    summary["feature_tag"] = model->value.feature_tag();
    pathclip::write_text_file(dir / "inversion.json", summary.dump(2));
    if (round_trip_error != nullptr) *round_trip_error = inv.round_trip_error;
  });
}

pc_status pc_evaluate(const pc_config* cfg, const char* image_ppm, const pc_scene* scene, double* precision,
                      double* recall, char** report_json) {
  return guarded([&] {
    require(cfg != nullptr && image_ppm != nullptr && scene != nullptr, "cfg, image_ppm and scene are required");
    const pathclip::LayoutAdherenceReport rep =
        pathclip::evaluate_layout_adherence(pathclip::load_ppm(image_ppm), scene->value, cfg->value.evaluation);
    if (precision != nullptr) *precision = rep.precision;
    if (recall != nullptr) *recall = rep.recall;
    if (report_json != nullptr) *report_json = copy_string(pathclip::report_to_json(rep));
  });
}

pc_status pc_evaluate_model(const pc_model* model, const pc_config* cfg, uint64_t seed, pc_progress_fn progress,
                            void* user, char** summary_json) {
  return guarded([&] {
    require(model != nullptr && cfg != nullptr && summary_json != nullptr, "model, cfg and summary_json are required");
    const auto summary = pathclip::evaluate_model(model->value, cfg->value, seed, wrap(progress, user));
    *summary_json = copy_string(pathclip::summary_to_json(summary));
  });
}

pc_status pc_demo(const pc_config* cfg, uint64_t seed, const char* out_dir, pc_progress_fn progress, void* user,
                  char** report_json) {
  return guarded([&] {
    require(cfg != nullptr && out_dir != nullptr, "cfg and out_dir are required");
    const std::string text = pathclip::run_demo(cfg->value, seed, out_dir, wrap(progress, user));
    if (report_json != nullptr) *report_json = copy_string(text);
  });
}

}  // extern "C"
