// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "pathclip/error.hpp"
#include "pathclip/io.hpp"

namespace pathclip {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Error bad_value(const std::string& key, const std::string& value, const char* expected) {
  return Error(ErrorCode::kConfig, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw bad_value(key, value, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) throw bad_value(key, value, "a finite number");
  return out;
}

std::string format_real(double v) {
  // Shortest text that parses back to the same value.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string& key, const std::string&)> set;
};

template <class Access>
Field int_field(Access access) {
  return {[access](const PipelineConfig& c) { return std::to_string(access(const_cast<PipelineConfig&>(c))); },
          [access](PipelineConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_integer<int>(k, v);
          }};
}

template <class Access>
Field u64_field(Access access) {
  return {[access](const PipelineConfig& c) { return std::to_string(access(const_cast<PipelineConfig&>(c))); },
          [access](PipelineConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_integer<std::uint64_t>(k, v);
          }};
}

template <class Access>
Field size_field(Access access) {
  return {[access](const PipelineConfig& c) { return std::to_string(access(const_cast<PipelineConfig&>(c))); },
          [access](PipelineConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_integer<std::size_t>(k, v);
          }};
}

template <class Access>
Field real_field(Access access) {
  return {[access](const PipelineConfig& c) { return format_real(access(const_cast<PipelineConfig&>(c))); },
          [access](PipelineConfig& c, const std::string& k, const std::string& v) { access(c) = parse_real(k, v); }};
}

template <class Access>
Field bool_field(Access access) {
  return {[access](const PipelineConfig& c) {
            return std::string(access(const_cast<PipelineConfig&>(c)) ? "true" : "false");
          },
          [access](PipelineConfig& c, const std::string& k, const std::string& v) {
            if (v == "true") {
              access(c) = true;
            } else if (v == "false") {
              access(c) = false;
            } else {
              throw bad_value(k, v, "true or false");
            }
          }};
}

template <class Access>
Field string_field(Access access) {
  return {[access](const PipelineConfig& c) { return access(const_cast<PipelineConfig&>(c)); },
          [access](PipelineConfig& c, const std::string&, const std::string& v) { access(c) = v; }};
}

template <class E, class Access>
Field enum_field(Access access, std::vector<std::pair<E, std::string>> names) {
  return {[access, names](const PipelineConfig& c) {
            const E value = access(const_cast<PipelineConfig&>(c));
            for (const auto& [e, n] : names) {
              if (e == value) return n;
            }
            return std::string("?");
          },
          [access, names](PipelineConfig& c, const std::string& k, const std::string& v) {
            std::string expected;
            for (const auto& [e, n] : names) {
              if (n == v) {
                access(c) = e;
                return;
              }
              expected += (expected.empty() ? "" : " | ") + n;
            }
            throw bad_value(k, v, expected.c_str());
          }};
}

#define PC_ACCESS(expr) [](PipelineConfig & c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", u64_field(PC_ACCESS(seed))},
      {"schedule.kind", string_field(PC_ACCESS(schedule_kind))},
      {"schedule.steps", int_field(PC_ACCESS(schedule_steps))},
      {"schedule.offset", real_field(PC_ACCESS(schedule_offset))},
      {"schedule.max_beta", real_field(PC_ACCESS(schedule_max_beta))},
      {"schedule.beta_start", real_field(PC_ACCESS(schedule_beta_start))},
      {"schedule.beta_end", real_field(PC_ACCESS(schedule_beta_end))},
      {"schedule.sample_steps", int_field(PC_ACCESS(guidance.sample_steps))},
      {"schedule.invert_steps", int_field(PC_ACCESS(guidance.invert_steps))},
      {"schedule.fixed_point_iters", int_field(PC_ACCESS(guidance.fixed_point_iters))},
      {"schedule.full_scale_sample_steps", int_field(PC_ACCESS(full_scale_sample_steps))},
      {"schedule.full_scale_invert_steps", int_field(PC_ACCESS(full_scale_invert_steps))},
      {"guidance.omega", real_field(PC_ACCESS(guidance.omega))},
      {"guidance.lambda_s", real_field(PC_ACCESS(guidance.lambda_s))},
      {"guidance.lambda_a", real_field(PC_ACCESS(guidance.lambda_a))},
      {"guidance.balance_s", real_field(PC_ACCESS(guidance.balance_s))},
      {"guidance.n_a", int_field(PC_ACCESS(guidance.n_a))},
      {"guidance.guided_steps", int_field(PC_ACCESS(guidance.guided_steps))},
      {"guidance.rank", int_field(PC_ACCESS(guidance.rank))},
      {"guidance.max_rank", int_field(PC_ACCESS(guidance.max_rank))},
      {"guidance.energy_fraction", real_field(PC_ACCESS(guidance.energy_fraction))},
      {"guidance.gradient_mode",
       enum_field<GradientMode>(PC_ACCESS(guidance.gradient_mode),
                                {{GradientMode::kAnalytic, "analytic"},
                                 {GradientMode::kFiniteDifference, "finite_difference"}})},
      {"guidance.fd_scale", real_field(PC_ACCESS(guidance.fd_scale))},
      {"guidance.inversion_conditioning",
       enum_field<InversionConditioning>(PC_ACCESS(guidance.inversion_conditioning),
                                         {{InversionConditioning::kScene, "scene"},
                                          {InversionConditioning::kCaption, "caption"},
                                          {InversionConditioning::kNull, "null"}})},
      {"guidance.full_scale_guided_steps", int_field(PC_ACCESS(full_scale_guided_steps))},
      {"guidance.full_scale_lambda_s", real_field(PC_ACCESS(full_scale_lambda_s))},
      {"pso.swarm_size", int_field(PC_ACCESS(pso.swarm_size))},
      {"pso.iterations", int_field(PC_ACCESS(pso.iterations))},
      {"pso.inertia", real_field(PC_ACCESS(pso.inertia))},
      {"pso.cognitive", real_field(PC_ACCESS(pso.cognitive))},
      {"pso.social", real_field(PC_ACCESS(pso.social))},
      {"pso.k", int_field(PC_ACCESS(pso.k))},
      {"pso.k_min", int_field(PC_ACCESS(pso.k_min))},
      {"pso.k_max", int_field(PC_ACCESS(pso.k_max))},
      {"pso.velocity_clamp", real_field(PC_ACCESS(pso.velocity_clamp))},
      {"pso.init_jitter", real_field(PC_ACCESS(pso.init_jitter))},
      {"pso.neighborhood", int_field(PC_ACCESS(pso.neighborhood))},
      {"planner.backend", string_field(PC_ACCESS(planner_backend))},
      {"planner.fixtures", string_field(PC_ACCESS(planner_fixtures))},
      {"planner.url", string_field(PC_ACCESS(planner_url))},
      {"planner.max_tokens", int_field(PC_ACCESS(planner_max_tokens))},
      {"planner.timeout_ms", int_field(PC_ACCESS(planner_timeout_ms))},
      {"planner.retries", int_field(PC_ACCESS(planner_retries))},
      {"planner.max_in_flight", int_field(PC_ACCESS(planner_max_in_flight))},
      {"model.image_size", int_field(PC_ACCESS(model.image_size))},
      {"model.channels", int_field(PC_ACCESS(model.channels))},
      {"model.attn_dim", int_field(PC_ACCESS(model.attn_dim))},
      {"model.fusion_dim", int_field(PC_ACCESS(model.fusion_dim))},
      {"model.text_dim", int_field(PC_ACCESS(model.text_dim))},
      {"model.num_freqs", int_field(PC_ACCESS(model.num_freqs))},
      {"model.time_freqs", int_field(PC_ACCESS(model.time_freqs))},
      {"model.text_seed", u64_field(PC_ACCESS(model.text_seed))},
      {"model.masked_attention", bool_field(PC_ACCESS(model.masked_attention))},
      {"train.epochs", int_field(PC_ACCESS(train.epochs))},
      {"train.batch_size", int_field(PC_ACCESS(train.batch_size))},
      {"train.learning_rate", real_field(PC_ACCESS(train.learning_rate))},
      {"train.momentum", real_field(PC_ACCESS(train.momentum))},
      {"train.caption_dropout", real_field(PC_ACCESS(train.caption_dropout))},
      {"train.uncond_dropout", real_field(PC_ACCESS(train.uncond_dropout))},
      {"train.dataset_size", int_field(PC_ACCESS(dataset_size))},
      {"train.dataset_seed", u64_field(PC_ACCESS(dataset_seed))},
      {"synthetic.canvas", int_field(PC_ACCESS(synthetic.canvas))},
      {"synthetic.min_primitives", int_field(PC_ACCESS(synthetic.min_primitives))},
      {"synthetic.max_primitives", int_field(PC_ACCESS(synthetic.max_primitives))},
      {"synthetic.min_radius", real_field(PC_ACCESS(synthetic.min_radius))},
      {"synthetic.max_radius", real_field(PC_ACCESS(synthetic.max_radius))},
      {"synthetic.min_area", size_field(PC_ACCESS(synthetic.min_area))},
      {"synthetic.gap", real_field(PC_ACCESS(synthetic.gap))},
      {"eval.iou_tolerance", real_field(PC_ACCESS(evaluation.iou_tolerance))},
      {"eval.min_region_area", size_field(PC_ACCESS(evaluation.min_region_area))},
      {"eval.scenes", int_field(PC_ACCESS(eval_scenes))},
      {"eval.primitives", int_field(PC_ACCESS(eval_primitives))},
      {"paths.weights", string_field(PC_ACCESS(weights))},
  };
  return table;
}

#undef PC_ACCESS

const Field& find_field(const std::string& key) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& [k, f] : fields()) m.emplace(k, &f);
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
  return *it->second;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) { find_field(key).set(*this, key, value); }

std::string PipelineConfig::get(const std::string& key) const { return find_field(key).get(*this); }

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.first);
    return k;
  }();
  return out;
}

std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) { return parse(read_text_file(path)); }

void PipelineConfig::validate() const {
  if (schedule_kind != "cosine" && schedule_kind != "linear") {
    throw Error(ErrorCode::kConfig, "schedule.kind must be cosine or linear");
  }
  if (schedule_steps < 1) throw Error(ErrorCode::kConfig, "schedule.steps must be >= 1");
  if (guidance.sample_steps > schedule_steps || guidance.invert_steps > schedule_steps) {
    throw Error(ErrorCode::kConfig, "schedule.sample_steps and schedule.invert_steps must not exceed schedule.steps");
  }
  guidance.validate();
  pso.validate();
  if (planner_backend != "mock" && planner_backend != "remote") {
    throw Error(ErrorCode::kConfig, "planner.backend must be mock or remote");
  }
  if (planner_max_tokens < 1 || planner_timeout_ms < 1 || planner_retries < 0 || planner_max_in_flight < 1) {
    throw Error(ErrorCode::kConfig, "planner limits out of range");
  }
  model.validate();
  train.validate();
  if (dataset_size < 1) throw Error(ErrorCode::kConfig, "train.dataset_size must be >= 1");
  if (synthetic.canvas != model.image_size) {
    throw Error(ErrorCode::kConfig, "synthetic.canvas must equal model.image_size");
  }
  if (synthetic.min_primitives < 1 || synthetic.max_primitives < synthetic.min_primitives ||
      !(synthetic.min_radius > 0.0) || synthetic.max_radius < synthetic.min_radius || synthetic.gap < 0.0) {
    throw Error(ErrorCode::kConfig, "synthetic options out of range");
  }
  if (!(evaluation.iou_tolerance > 0.0 && evaluation.iou_tolerance <= 1.0)) {
    throw Error(ErrorCode::kConfig, "eval.iou_tolerance must be in (0, 1]");
  }
  if (eval_scenes < 1 || eval_primitives < 1) throw Error(ErrorCode::kConfig, "eval.scenes and eval.primitives must be >= 1");
}

NoiseSchedule PipelineConfig::make_schedule() const {
  if (schedule_kind == "linear") return NoiseSchedule::linear(schedule_steps, schedule_beta_start, schedule_beta_end);
  return NoiseSchedule::cosine(schedule_steps, schedule_offset, schedule_max_beta);
}

RemoteOptions PipelineConfig::remote_options() const {
  RemoteOptions r = RemoteOptions::from_environment();
  if (!planner_url.empty()) r.url = planner_url;
  r.max_tokens = planner_max_tokens;
  r.timeout = std::chrono::milliseconds(planner_timeout_ms);
  r.retries = planner_retries;
  r.max_in_flight = planner_max_in_flight;
  return r;
}

}  // namespace pathclip
