// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Structure and appearance guidance: a per-timestep semantic basis from
// primitive-generation features, structure coordinates of an inverted spatial
// condition, guidance energies and their gradients, and the guided sampler.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathclip/diffusion.hpp"
#include "pathclip/grounding.hpp"

namespace pathclip {

struct SvdResult {
  Vector singular_values;  // non-increasing
  Matrix v;                // n x n, column i is the i-th right singular vector
};

/// One-sided Jacobi SVD of an m x n matrix. Each right singular vector is
/// signed so that its largest-magnitude entry is positive.
SvdResult jacobi_svd(const Matrix& a);

/// Cumulative sum(sigma_k^2, k <= r) / sum(sigma_k^2) for r = 1..n.
std::vector<double> retained_energy(const Vector& singular_values);

struct SemanticBasis {
  int t = 0;
  Matrix rows;             // r x C_f, orthonormal rows
  Vector mean;             // C_f, subtracted before projection
  Vector singular_values;  // all C_f values, non-increasing

  int rank() const { return static_cast<int>(rows.rows()); }
};

struct BasisOptions {
  int rank = 0;  // 0 chooses automatically
  int max_rank = 16;
  double energy_fraction = 0.9;
  int min_rank = 1;
};

/// Rank r used for the given singular values under `options`.
int choose_rank(const Vector& singular_values, const BasisOptions& options);

/// Stacks every position of every feature map (rows), mean-centres the
/// columns and keeps the top right singular vectors.
SemanticBasis compute_basis(std::span<const Tensor* const> features, int t, const BasisOptions& options);

/// One basis per recorded timestep, in trajectory order. All runs must share
/// timesteps and feature shapes. Throws ShapeMismatch, RankTooLarge.
std::vector<SemanticBasis> compute_semantic_basis(std::span<const Trajectory> runs, const BasisOptions& options);

/// S[i, j] = B (F[i, j] - mean), shaped h_f x w_f x r.
Tensor project_features(const Tensor& features, const SemanticBasis& basis);

/// (1 + omega) eps_cond - omega eps_uncond.
Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double omega);

/// Classifier-free guidance around a base denoiser; the unconditional branch
/// uses null conditioning, features come from the conditional branch.
class CfgDenoiser final : public Denoiser {
 public:
  CfgDenoiser(const Denoiser& base, double omega) : base_(base), omega_(omega) {}

  Prediction predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const override;
  Tensor feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                     const Tensor& grad_features) const override;
  std::string feature_tag() const override { return base_.feature_tag(); }

  double omega() const { return omega_; }

 private:
  const Denoiser& base_;
  double omega_;
};

/// v_k = sum_ij sigmoid(S_ijk) F_ij / sum_ij sigmoid(S_ijk) for k < count.
std::vector<Vector> appearance_stats(const Tensor& coords, const Tensor& features, int count);

/// Mean over k of |v_k - ref_k|^2. Throws LengthMismatch unless both lists hold n_a vectors.
double appearance_energy(const std::vector<Vector>& current, const std::vector<Vector>& reference, int n_a);

/// Masked mean of |S - S_ref|^2; 0 (with *empty_mask set) for an empty mask.
double structure_energy_fg(const Tensor& coords, const Tensor& coords_ref, const PolygonMask& mask,
                           bool* empty_mask = nullptr);

/// balance * background mean of |max(S - tau, 0)|^2; 0 (with *full_mask set)
/// when the mask covers every cell.
double structure_energy_bg(const Tensor& coords, const Vector& tau, const PolygonMask& mask, double balance,
                           bool* full_mask = nullptr);

/// Per-channel spatial maximum of the coordinates.
Vector channel_thresholds(const Tensor& coords);

/// Area-average onto an h x w grid, thresholded at 0.5.
PolygonMask downsample_mask(const PolygonMask& mask, int width, int height);

enum class GradientMode { kAnalytic, kFiniteDifference };

struct EnergyClosure {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;  // analytic; may be empty
};

/// Gradient of the closure at x. Finite differences are central with step
/// fd_scale * max(1, max|x|). Throws NonFiniteEnergy.
Tensor energy_gradient(const EnergyClosure& energy, const Tensor& x, GradientMode mode, double fd_scale = 1e-3);

enum class EnergyKind { kStructureForeground, kStructureBackground, kAppearance };

struct GuidanceEnergies {
  double g_sf = 0.0;
  double g_sb = 0.0;
  double g_a = 0.0;
};

/// Everything needed to evaluate the three energies at one timestep.
class GuidanceObjective {
 public:
  GuidanceObjective(const Denoiser& denoiser, Conditioning cond, Timestep ts, SemanticBasis basis,
                    std::optional<Tensor> coords_ref, std::vector<Vector> appearance_ref, PolygonMask mask,
                    double balance, int n_a);

  GuidanceEnergies energies_from_features(const Tensor& features) const;
  GuidanceEnergies energies(const Tensor& x) const;
  double energy(EnergyKind kind, const Tensor& x) const;

  /// d energy / d features.
  Tensor feature_gradient(EnergyKind kind, const Tensor& features) const;
  /// d energy / d x through the denoiser's feature map.
  Tensor gradient(EnergyKind kind, const Tensor& x, const Tensor& features) const;

  EnergyClosure closure(EnergyKind kind) const;

  bool has_structure() const { return coords_ref_.has_value(); }
  const SemanticBasis& basis() const { return basis_; }

 private:
  const Denoiser& denoiser_;
  Conditioning cond_;
  Timestep ts_;
  SemanticBasis basis_;
  std::optional<Tensor> coords_ref_;
  Vector tau_;
  std::vector<Vector> appearance_ref_;
  PolygonMask mask_;
  double balance_;
  int n_a_;
};

/// Structure weight at the full-scale reference; the toy feature scale is
/// unstable for lambda_s above roughly 50.
inline constexpr double kFullScaleLambdaS = 500.0;

/// Conditioning used when inverting the spatial condition image.
enum class InversionConditioning { kScene, kCaption, kNull };

struct GuidanceConfig {
  double omega = 1.0;
  double lambda_s = 20.0;  // toy-model scale; see kFullScaleLambdaS
  double lambda_a = 4.0;   // 0.2 * lambda_s
  double balance_s = 1.0;
  int n_a = 2;
  int guided_steps = 30;
  int rank = 0;  // 0: min(max_rank, smallest rank reaching energy_fraction)
  int max_rank = 16;
  double energy_fraction = 0.9;
  GradientMode gradient_mode = GradientMode::kAnalytic;
  double fd_scale = 1e-3;
  int sample_steps = 50;
  int invert_steps = 100;
  int fixed_point_iters = 2;
  InversionConditioning inversion_conditioning = InversionConditioning::kScene;

  void validate() const;
};

/// eps_cfg + lambda_s (grad_sf + grad_sb) + lambda_a grad_a; zero weights skip their terms.
Tensor guided_score(const Tensor& eps_cfg, const Tensor& grad_sf, const Tensor& grad_sb, const Tensor& grad_a,
                    const GuidanceConfig& cfg);

struct StepDiagnostics {
  int t = 0;
  double g_sf = 0.0;
  double g_sb = 0.0;
  double g_a = 0.0;
  std::array<double, 3> grad_norms{};  // sf, sb, a
};

std::string diagnostics_to_jsonl(const std::vector<StepDiagnostics>& log);

struct GuidedResult {
  Tensor x0;                        // model range
  Tensor x_T;
  std::vector<StepDiagnostics> log;  // one entry per guided step
  std::vector<Tensor> primitive_images;
  std::vector<int> ranks;           // per sampling timestep
};

/// Primitive generation (n_a CFG runs), semantic basis, inversion of the
/// optional spatial condition (model range), then the guided DDIM loop.
GuidedResult guided_sample(const Denoiser& denoiser, const LayoutScene& scene, const Tensor* condition,
                           const GuidanceConfig& cfg, const NoiseSchedule& schedule, std::uint64_t seed,
                           const std::function<void(const std::string&)>& on_stage = {});

/// Starting noise used by guided_sample for a given seed.
Tensor initial_noise(int height, int width, std::uint64_t seed);

}  // namespace pathclip
