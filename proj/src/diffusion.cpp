// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binary_io.hpp"
#include "pathclip/error.hpp"

namespace pathclip {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.size() < 2) throw Error(ErrorCode::kInvalidSchedule, "schedule needs at least one step");
  if (alpha_bar_[0] != 1.0) throw Error(ErrorCode::kInvalidSchedule, "alpha_bar[0] must equal 1");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    if (!(alpha_bar_[t] > 0.0) || !(alpha_bar_[t] < alpha_bar_[t - 1])) {
      throw Error(ErrorCode::kInvalidSchedule,
                  "alpha_bar must be strictly decreasing and positive (violated at t=" + std::to_string(t) + ")");
    }
  }
}

NoiseSchedule NoiseSchedule::cosine(int steps, double offset, double max_beta) {
  if (steps < 1) throw Error(ErrorCode::kInvalidSchedule, "schedule needs at least one step");
  if (!(max_beta > 0.0 && max_beta < 1.0)) throw Error(ErrorCode::kInvalidSchedule, "max_beta must be in (0, 1)");
  auto f = [&](int t) {
    const double c = std::cos((static_cast<double>(t) / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> ab(static_cast<std::size_t>(steps) + 1);
  ab[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double beta = std::min(1.0 - f(t) / f(t - 1), max_beta);
    ab[t] = ab[t - 1] * (1.0 - beta);
  }
  return NoiseSchedule(std::move(ab));
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw Error(ErrorCode::kInvalidSchedule, "schedule needs at least one step");
  std::vector<double> ab(static_cast<std::size_t>(steps) + 1);
  ab[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    ab[t] = ab[t - 1] * (1.0 - beta);
  }
  return NoiseSchedule(std::move(ab));
}

std::vector<int> timestep_grid(int T, int num_steps) {
  if (num_steps < 1 || num_steps > T) {
    throw Error(ErrorCode::kInvalidArgument,
                "step count " + std::to_string(num_steps) + " must be in 1.." + std::to_string(T));
  }
  std::vector<int> grid(static_cast<std::size_t>(num_steps) + 1);
  for (int i = 0; i <= num_steps; ++i) {
    grid[i] = static_cast<int>(std::lround(static_cast<double>(i) * T / num_steps));
  }
  return grid;
}

Conditioning Conditioning::from_scene(const LayoutScene& scene) {
  Conditioning c;
  c.canvas_w = scene.canvas_w;
  c.canvas_h = scene.canvas_h;
  c.caption = scene.global_caption;
  c.primitives = scene.primitives;
  return c;
}

Conditioning Conditioning::null(int canvas_w, int canvas_h) {
  Conditioning c;
  c.canvas_w = canvas_w;
  c.canvas_h = canvas_h;
  return c;
}

const TrajectoryStep* Trajectory::find(int t) const {
  for (const auto& s : steps) {
    if (s.t == t) return &s;
  }
  return nullptr;
}

Tensor ddim_transfer(const Tensor& x_from, const Tensor& eps_hat, int t_from, int t_to,
                     const NoiseSchedule& schedule) {
  require_same_shape(x_from, eps_hat, "ddim update: x and eps shapes differ");
  const double a = schedule.alpha_bar(t_from);
  const double a_to = schedule.alpha_bar(t_to);
  const double sa = std::sqrt(a), s1a = std::sqrt(1.0 - a);
  const double sb = std::sqrt(a_to), s1b = std::sqrt(1.0 - a_to);
  Tensor out(x_from.height(), x_from.width(), x_from.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x0 = (x_from[i] - s1a * eps_hat[i]) / sa;
    out[i] = sb * x0 + s1b * eps_hat[i];
  }
  return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule) {
  if (!(t > t_prev) || t_prev < 0 || t > schedule.steps()) {
    throw Error(ErrorCode::kStepOrderViolation,
                "ddim_step needs T >= t > t_prev >= 0, got t=" + std::to_string(t) + " t_prev=" + std::to_string(t_prev));
  }
  return ddim_transfer(x_t, eps_hat, t, t_prev, schedule);
}

SampleResult ddim_sample(const Denoiser& denoiser, const Conditioning& cond, const NoiseSchedule& schedule,
                         const Tensor& x_T, int num_steps, bool record_features) {
  const std::vector<int> grid = timestep_grid(schedule.steps(), num_steps);
  SampleResult result;
  Tensor x = x_T;
  for (int i = num_steps; i > 0; --i) {
    const int t = grid[i];
    const int t_prev = grid[i - 1];
    Prediction pred = denoiser.predict(x, Timestep{t, schedule.alpha_bar(t)}, cond);
    Tensor next = ddim_step(x, pred.eps, t, t_prev, schedule);
    if (record_features) result.trajectory.steps.push_back({t, std::move(x), std::move(pred.features)});
    x = std::move(next);
  }
  result.x0 = std::move(x);
  return result;
}

InversionResult ddim_invert(const Tensor& x0, const Denoiser& denoiser, const Conditioning& cond,
                            const NoiseSchedule& schedule, const InversionOptions& options) {
  if (options.fixed_point_iters < 0) throw Error(ErrorCode::kInvalidArgument, "fixed_point_iters must be >= 0");
  const std::vector<int> grid = timestep_grid(schedule.steps(), options.num_steps);
  InversionResult result;
  Tensor x = x0;
  for (int i = 0; i < options.num_steps; ++i) {
    const int t = grid[i];
    const int t_next = grid[i + 1];
    Prediction pred = denoiser.predict(x, Timestep{t, schedule.alpha_bar(t)}, cond);
    Tensor next = ddim_transfer(x, pred.eps, t, t_next, schedule);
    for (int k = 0; k < options.fixed_point_iters; ++k) {
      const Prediction ahead = denoiser.predict(next, Timestep{t_next, schedule.alpha_bar(t_next)}, cond);
      next = ddim_transfer(x, ahead.eps, t, t_next, schedule);
    }
    result.trajectory.steps.push_back({t, std::move(x), std::move(pred.features)});
    x = std::move(next);
  }
  const int T = grid.back();
  Prediction last = denoiser.predict(x, Timestep{T, schedule.alpha_bar(T)}, cond);
  result.trajectory.steps.push_back({T, x, std::move(last.features)});
  result.x_T = std::move(x);
  return result;
}

GaussianDenoiser::GaussianDenoiser(std::vector<double> mean, std::vector<double> variance)
    : mean_(std::move(mean)), variance_(std::move(variance)) {
  if (mean_.empty() || mean_.size() != variance_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "mean and variance must be non-empty and equally long");
  }
  for (double v : variance_) {
    if (!(v > 0.0)) throw Error(ErrorCode::kNonPositiveVariance, "variances must be positive");
  }
}

Tensor GaussianDenoiser::posterior_mean(const Tensor& x, double alpha_bar) const {
  if (x.size() != mean_.size()) throw Error(ErrorCode::kShapeMismatch, "input does not match the oracle dimension");
  Tensor out(x.height(), x.width(), x.channels());
  const double sa = std::sqrt(alpha_bar);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (sa * variance_[i] * x[i] + (1.0 - alpha_bar) * mean_[i]) /
             (alpha_bar * variance_[i] + 1.0 - alpha_bar);
  }
  return out;
}

Prediction GaussianDenoiser::predict(const Tensor& x, const Timestep& ts, const Conditioning&) const {
  Prediction pred;
  pred.features = posterior_mean(x, ts.alpha_bar);
  pred.eps = Tensor(x.height(), x.width(), x.channels());
  if (ts.alpha_bar >= 1.0) return pred;  // no noise present
  const double sa = std::sqrt(ts.alpha_bar);
  const double s1a = std::sqrt(1.0 - ts.alpha_bar);
  for (std::size_t i = 0; i < x.size(); ++i) pred.eps[i] = (x[i] - sa * pred.features[i]) / s1a;
  return pred;
}

Tensor GaussianDenoiser::feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning&,
                                     const Tensor& grad_features) const {
  require_same_shape(x, grad_features, "feature gradient shape");
  Tensor out(x.height(), x.width(), x.channels());
  const double sa = std::sqrt(ts.alpha_bar);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = grad_features[i] * sa * variance_[i] / (ts.alpha_bar * variance_[i] + 1.0 - ts.alpha_bar);
  }
  return out;
}

void write_feature_dump(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  const auto& steps = trajectory.steps;
  const int h = steps.empty() ? 0 : steps.front().features.height();
  const int w = steps.empty() ? 0 : steps.front().features.width();
  const int c = steps.empty() ? 0 : steps.front().features.channels();
  detail::write_u32(out, static_cast<std::uint32_t>(steps.size()));
  detail::write_u32(out, static_cast<std::uint32_t>(h));
  detail::write_u32(out, static_cast<std::uint32_t>(w));
  detail::write_u32(out, static_cast<std::uint32_t>(c));
  for (const auto& s : steps) {
    if (s.features.height() != h || s.features.width() != w || s.features.channels() != c) {
      throw Error(ErrorCode::kShapeMismatch, "trajectory feature shapes differ between steps");
    }
    for (double v : s.features.values()) detail::write_f32(out, v);
  }
}

FeatureDump read_feature_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  FeatureDump dump;
  dump.steps = static_cast<int>(detail::read_u32(in));
  dump.height = static_cast<int>(detail::read_u32(in));
  dump.width = static_cast<int>(detail::read_u32(in));
  dump.channels = static_cast<int>(detail::read_u32(in));
  const std::size_t n = static_cast<std::size_t>(dump.steps) * dump.height * dump.width * dump.channels;
  dump.values.resize(n);
  for (auto& v : dump.values) v = static_cast<float>(detail::read_f32(in));
  return dump;
}

Tensor gaussian_noise(int height, int width, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out(height, width, channels);
  for (auto& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace pathclip
