// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic (eta = 0) DDIM sampling and inversion over a pluggable
// denoiser, plus a closed-form Gaussian denoiser used as a correctness oracle.

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pathclip/geometry.hpp"
#include "pathclip/tensor.hpp"

namespace pathclip {

/// alpha_bar[0] = 1 and strictly decreasing over t = 0..T, all in (0, 1].
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  /// Cosine alpha-bar with per-step beta clipped at max_beta. The 0.5 cap
  /// keeps alpha_bar[T] near 1e-4 rather than ~1e-7 at T = 100, which bounds
  /// the effect of an eps perturbation on the first sampling step.
  static NoiseSchedule cosine(int steps, double offset = 0.008, double max_beta = 0.5);
  /// Linear beta ramp.
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& values() const { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};

/// Evenly spaced timesteps 0 = t_0 < ... < t_n = T (ascending).
std::vector<int> timestep_grid(int T, int num_steps);

struct Timestep {
  int t = 0;
  double alpha_bar = 1.0;
};

/// Conditioning passed to a denoiser. An empty primitive list with an empty
/// caption is the null (unconditional) conditioning.
struct Conditioning {
  int canvas_w = 0;
  int canvas_h = 0;
  std::string caption;
  std::vector<PathClipPrimitive> primitives;
  /// false: every token attends everywhere (ablation without attention masks).
  bool masked = true;

  static Conditioning from_scene(const LayoutScene& scene);
  static Conditioning null(int canvas_w, int canvas_h);
  bool is_null() const { return primitives.empty() && caption.empty(); }
};

struct Prediction {
  Tensor eps;
  Tensor features;  // h_f x w_f x C_f
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// eps_hat and the feature map at the extraction point. Deterministic.
  virtual Prediction predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const = 0;

  /// Vector-Jacobian product: gradient w.r.t. x of <grad_features, features(x)>.
  virtual Tensor feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                             const Tensor& grad_features) const = 0;

  virtual std::string feature_tag() const = 0;
};

struct TrajectoryStep {
  int t = 0;
  Tensor x;
  Tensor features;
};

/// Steps ordered by decreasing t for sampling, increasing t for inversion.
struct Trajectory {
  std::vector<TrajectoryStep> steps;

  /// Step recorded at timestep t, or nullptr.
  const TrajectoryStep* find(int t) const;
};

/// x_hat0 = (x_t - sqrt(1 - a_t) eps) / sqrt(a_t);
/// x_prev = sqrt(a_prev) x_hat0 + sqrt(1 - a_prev) eps. Requires t > t_prev.
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule);

/// Same update without the ordering check (used by inversion).
Tensor ddim_transfer(const Tensor& x_from, const Tensor& eps_hat, int t_from, int t_to, const NoiseSchedule& schedule);

struct SampleResult {
  Tensor x0;
  Trajectory trajectory;
};

SampleResult ddim_sample(const Denoiser& denoiser, const Conditioning& cond, const NoiseSchedule& schedule,
                         const Tensor& x_T, int num_steps, bool record_features);

struct InversionOptions {
  int num_steps = 100;
  /// Implicit refinement of each step: x_{t+1} <- transfer(x_t, eps(x_{t+1}, t+1)).
  int fixed_point_iters = 2;
};

struct InversionResult {
  Tensor x_T;
  Trajectory trajectory;  // every grid timestep, including T, with features
};

InversionResult ddim_invert(const Tensor& x0, const Denoiser& denoiser, const Conditioning& cond,
                            const NoiseSchedule& schedule, const InversionOptions& options = {});

/// Exact posterior-mean denoiser for x0 ~ N(mean, diag(variance)).
/// Inputs are shaped (D, 1, 1); features are E[x0 | x_t] with the same shape.
class GaussianDenoiser final : public Denoiser {
 public:
  GaussianDenoiser(std::vector<double> mean, std::vector<double> variance);

  Prediction predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const override;
  Tensor feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                     const Tensor& grad_features) const override;
  std::string feature_tag() const override { return "posterior_mean"; }

  /// E[x0 | x_t] = (sqrt(a) s2 x_t + (1 - a) mu) / (a s2 + 1 - a), componentwise.
  Tensor posterior_mean(const Tensor& x, double alpha_bar) const;

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;
};

/// Header (steps, h_f, w_f, C_f as little-endian u32), then little-endian
/// float32 features in t-major order.
void write_feature_dump(const Trajectory& trajectory, const std::filesystem::path& path);

struct FeatureDump {
  int steps = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;
};
FeatureDump read_feature_dump(const std::filesystem::path& path);

/// Standard normal tensor from a 64-bit seed.
Tensor gaussian_noise(int height, int width, int channels, std::uint64_t seed);

}  // namespace pathclip
