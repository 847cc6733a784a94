// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "json.hpp"
#include "pathclip/error.hpp"
#include "pathclip/io.hpp"
#include "pathclip/seed.hpp"

namespace pathclip {
namespace {

constexpr std::uint64_t kEvalStream = 0xE7A1;
constexpr int kGridSamples = 16;

void report(const ProgressFn& progress, const std::string& stage, int step, int total, double value) {
  if (progress) progress(stage, step, total, value);
}

// Prefixes the failing stage onto any error escaping `body`.
template <class F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), stage + ": " + e.what());
  }
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SceneFit fit_mask_files(const PipelineConfig& cfg, const std::vector<std::filesystem::path>& masks,
                        const std::vector<std::string>& captions) {
  if (masks.empty()) throw Error(ErrorCode::kEmptyInput, "no mask files given");
  std::vector<PolygonMask> loaded;
  for (const auto& path : masks) loaded.push_back(load_pgm(path));
  std::vector<std::string> caps = captions;
  if (caps.empty()) caps.assign(masks.size(), "object");
  PsoConfig pso = cfg.pso;
  pso.seed = cfg.seed;
  return fit_scene(loaded, caps, pso);
}

LayoutScene plan_prompt(const PipelineConfig& cfg, const std::string& prompt) {
  auto backend = make_backend(cfg.planner_backend, cfg.planner_fixtures, cfg.remote_options());
  return plan_scene(*backend, prompt, cfg.synthetic.canvas, cfg.synthetic.canvas);
}

TrainResult train_model(const PipelineConfig& cfg, std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  const auto dataset = make_synthetic_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.synthetic);
  return train_toy_denoiser(dataset, cfg.make_schedule(), cfg.model, cfg.train, seed, [&](int epoch, double loss) {
    report(progress, "train", epoch, cfg.train.epochs, loss);
  });
}

ToyDenoiser obtain_model(const PipelineConfig& cfg, std::uint64_t seed, const std::filesystem::path& save_to,
                         const ProgressFn& progress) {
  if (!cfg.weights.empty() && std::filesystem::exists(cfg.weights)) return ToyDenoiser::load(cfg.weights);
  TrainResult trained = train_model(cfg, seed, progress);
  if (!save_to.empty()) trained.model.save(save_to);
  return std::move(trained.model);
}

Generation generate_image(const Denoiser& model, const PipelineConfig& cfg, const LayoutScene& scene,
                          const Tensor* condition, std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  if (scene.canvas_w != cfg.model.image_size || scene.canvas_h != cfg.model.image_size) {
    throw Error(ErrorCode::kDimensionMismatch, "scene canvas " + std::to_string(scene.canvas_w) + "x" +
                                                   std::to_string(scene.canvas_h) + " does not match the model size " +
                                                   std::to_string(cfg.model.image_size));
  }
  for (const auto& prim : scene.primitives) primitive_color(prim);
  std::optional<Tensor> cond_model;
  if (condition != nullptr) cond_model = to_model_range(*condition);
  int stage_index = 0;
  GuidedResult guided = guided_sample(model, scene, cond_model ? &*cond_model : nullptr, cfg.guidance,
                                      cfg.make_schedule(), seed,
                                      [&](const std::string& stage) { report(progress, stage, ++stage_index, 4, 0.0); });
  Generation out{from_model_range(guided.x0), std::move(guided)};
  return out;
}

Inversion invert_image(const Denoiser& model, const PipelineConfig& cfg, const Tensor& image,
                       const LayoutScene* scene) {
  cfg.validate();
  const Conditioning cond =
      scene != nullptr ? Conditioning::from_scene(*scene) : Conditioning::null(image.width(), image.height());
  const NoiseSchedule schedule = cfg.make_schedule();
  const Tensor x0 = to_model_range(image);
  Inversion out;
  out.result = ddim_invert(x0, model, cond, schedule, {cfg.guidance.invert_steps, cfg.guidance.fixed_point_iters});
  const SampleResult back = ddim_sample(model, cond, schedule, out.result.x_T, cfg.guidance.invert_steps, false);
  double diff = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) diff += (back.x0[i] - x0[i]) * (back.x0[i] - x0[i]);
  out.round_trip_error = x0.norm() > 0.0 ? std::sqrt(diff) / x0.norm() : std::sqrt(diff);
  out.reconstruction = from_model_range(back.x0);
  return out;
}

std::vector<LayoutScene> evaluation_scenes(const PipelineConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, kEvalStream));
  std::vector<LayoutScene> out;
  for (int i = 0; i < cfg.eval_scenes; ++i) {
    out.push_back(make_synthetic_sample(rng, cfg.eval_primitives, cfg.synthetic).scene);
  }
  return out;
}

AdherenceSummary evaluate_model(const Denoiser& model, const PipelineConfig& cfg, std::uint64_t seed,
                                const ProgressFn& progress) {
  const auto scenes = evaluation_scenes(cfg, seed);
  AdherenceSummary summary;
  std::vector<double> p, r, a;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Generation gen = generate_image(model, cfg, scenes[i], nullptr, mix_seed(seed, kEvalStream, i + 1));
    LayoutAdherenceReport rep = evaluate_layout_adherence(gen.image, scenes[i], cfg.evaluation);
    p.push_back(rep.precision);
    r.push_back(rep.recall);
    a.push_back(rep.accuracy);
    summary.reports.push_back(std::move(rep));
    report(progress, "evaluate", static_cast<int>(i + 1), static_cast<int>(scenes.size()), r.back());
  }
  summary.median_precision = median(p);
  summary.median_recall = median(r);
  summary.median_accuracy = median(a);
  const double n = static_cast<double>(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    summary.mean_precision += p[i] / n;
    summary.mean_recall += r[i] / n;
  }
  return summary;
}

std::string summary_to_json(const AdherenceSummary& summary) {
  nlohmann::json j;
  j["scenes"] = summary.reports.size();
  j["median_precision"] = summary.median_precision;
  j["median_recall"] = summary.median_recall;
  j["median_accuracy"] = summary.median_accuracy;
  j["mean_precision"] = summary.mean_precision;
  j["mean_recall"] = summary.mean_recall;
  j["per_scene"] = nlohmann::json::array();
  for (const auto& rep : summary.reports) {
    j["per_scene"].push_back({{"precision", rep.precision},
                              {"recall", rep.recall},
                              {"accuracy", rep.accuracy},
                              {"true_positives", rep.true_positives},
                              {"false_positives", rep.false_positives},
                              {"false_negatives", rep.false_negatives},
                              {"zero_detections", rep.zero_detections}});
  }
  return j.dump(2);
}

Tensor tile_images(const std::vector<Tensor>& images, int columns) {
  if (images.empty() || columns < 1) throw Error(ErrorCode::kEmptyInput, "nothing to tile");
  const int h = images.front().height();
  const int w = images.front().width();
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  Tensor grid(rows * (h + 1) + 1, cols * (w + 1) + 1, 3, 0.5);
  for (int i = 0; i < n; ++i) {
    const Tensor& img = images[static_cast<std::size_t>(i)];
    if (img.height() != h || img.width() != w || img.channels() != 3) {
      throw Error(ErrorCode::kShapeMismatch, "tiled images must share one RGB size");
    }
    const int oy = 1 + (i / cols) * (h + 1);
    const int ox = 1 + (i % cols) * (w + 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) grid(oy + y, ox + x, c) = img(y, x, c);
      }
    }
  }
  return grid;
}

std::string run_demo(const PipelineConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                     const ProgressFn& progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  nlohmann::json timings = nlohmann::json::object();
  nlohmann::json report_json;
  report_json["seed"] = seed;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto timed = [&](const std::string& stage, auto&& body) {
    report(progress, stage, 0, 0, 0.0);
    const auto t0 = Clock::now();
    in_stage(stage, body);
    timings[stage] = std::chrono::duration<double>(Clock::now() - t0).count();
  };

  std::vector<SyntheticSample> dataset;
  timed("dataset", [&] {
    dataset = make_synthetic_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.synthetic);
    std::vector<Tensor> shown;
    for (std::size_t i = 0; i < dataset.size() && i < kGridSamples; ++i) shown.push_back(dataset[i].image);
    save_ppm(tile_images(shown, 4), out_dir / "dataset_grid.ppm");
  });

  timed("fit", [&] {
    const SyntheticSample& sample = dataset.front();
    std::vector<std::filesystem::path> paths;
    std::vector<std::string> captions;
    for (std::size_t i = 0; i < sample.scene.primitives.size(); ++i) {
      const auto& prim = sample.scene.primitives[i];
      paths.push_back(out_dir / ("mask_" + std::to_string(i) + ".pgm"));
      save_pgm(rasterize(prim, sample.scene.canvas_w, sample.scene.canvas_h), paths.back());
      captions.push_back(prim.appearance.text());
    }
    PipelineConfig local = cfg;
    local.seed = seed;
    const SceneFit fit = fit_mask_files(local, paths, captions);
    save_scene(fit.scene, out_dir / "fitted_scene.json");
    report_json["fit"] = {{"ious", fit.ious}, {"chosen_k", fit.chosen_k}};
  });

  std::optional<ToyDenoiser> model;
  timed("model", [&] { model.emplace(obtain_model(cfg, seed, out_dir / "model.bin", progress)); });

  timed("generate", [&] {
    const LayoutScene scene = evaluation_scenes(cfg, seed).front();
    const Tensor condition = render_scene(recolor_scene(scene));
    save_scene(scene, out_dir / "scene.json");
    save_ppm(condition, out_dir / "condition.ppm");
    const Generation gen = generate_image(*model, cfg, scene, &condition, seed, progress);
    save_ppm(gen.image, out_dir / "generated.ppm");
    write_text_file(out_dir / "diagnostics.jsonl", diagnostics_to_jsonl(gen.guided.log));
    const LayoutAdherenceReport rep = evaluate_layout_adherence(gen.image, scene, cfg.evaluation);
    report_json["generation"] = {{"precision", rep.precision},
                                 {"recall", rep.recall},
                                 {"final_g_sf", gen.guided.log.empty() ? 0.0 : gen.guided.log.back().g_sf}};
  });

  timed("evaluate", [&] {
    const AdherenceSummary summary = evaluate_model(*model, cfg, seed, progress);
    report_json["adherence"] = nlohmann::json::parse(summary_to_json(summary));
  });

  timings["total"] = std::chrono::duration<double>(Clock::now() - start).count();
  const std::string text = report_json.dump(2);
  write_text_file(out_dir / "report.json", text);
  write_text_file(out_dir / "timings.json", timings.dump(2));
  return text;
}

}  // namespace pathclip
