// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pathclip/error.hpp"
#include "pathclip/seed.hpp"

namespace pathclip {
namespace {

constexpr int kMaxJacobiSweeps = 60;

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

ConstMap as_matrix(const Tensor& t) { return {t.storage().data(), t.positions(), t.channels()}; }

Tensor to_tensor(const Matrix& m, int h, int w) {
  Tensor t(h, w, static_cast<int>(m.cols()));
  MutMap(t.storage().data(), m.rows(), m.cols()) = m;
  return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_grid(const Tensor& coords, const PolygonMask& mask) {
  if (mask.width() != coords.width() || mask.height() != coords.height()) {
    throw Error(ErrorCode::kShapeMismatch, "mask grid does not match the feature grid");
  }
}

}  // namespace

SvdResult jacobi_svd(const Matrix& a) {
  Eigen::MatrixXd u = a;  // column-major: rotations act on columns
  const Eigen::Index n = u.cols();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = u.col(p).squaredNorm();
        const double beta = u.col(q).squaredNorm();
        const double gamma = u.col(p).dot(u.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Eigen::VectorXd up = u.col(p);
        u.col(p) = c * up - s * u.col(q);
        u.col(q) = s * up + c * u.col(q);
        const Eigen::VectorXd vp = v.col(p);
        v.col(p) = c * vp - s * v.col(q);
        v.col(q) = s * vp + c * v.col(q);
      }
    }
    if (!rotated) break;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = u.col(i).norm();
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return norms[x] > norms[y]; });

  SvdResult out;
  out.singular_values.resize(n);
  out.v.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.singular_values[i] = norms[src];
    Eigen::VectorXd col = v.col(src);
    Eigen::Index big = 0;
    col.cwiseAbs().maxCoeff(&big);
    if (col[big] < 0.0) col = -col;
    out.v.col(i) = col;
  }
  return out;
}

std::vector<double> retained_energy(const Vector& singular_values) {
  const double total = singular_values.squaredNorm();
  std::vector<double> out;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    acc += singular_values[i] * singular_values[i];
    out.push_back(total > 0.0 ? acc / total : 1.0);
  }
  return out;
}

int choose_rank(const Vector& singular_values, const BasisOptions& options) {
  const auto n = static_cast<int>(singular_values.size());
  int r = options.rank;
  if (r <= 0) {
    const std::vector<double> energy = retained_energy(singular_values);
    r = n;
    for (int i = 0; i < n; ++i) {
      if (energy[i] >= options.energy_fraction) {
        r = i + 1;
        break;
      }
    }
    r = std::max(std::min(r, options.max_rank), options.min_rank);
  }
  if (r > n) {
    throw Error(ErrorCode::kRankTooLarge,
                "rank " + std::to_string(r) + " exceeds the feature channel count " + std::to_string(n));
  }
  return r;
}

SemanticBasis compute_basis(std::span<const Tensor* const> features, int t, const BasisOptions& options) {
  if (features.empty()) throw Error(ErrorCode::kEmptyInput, "no feature maps for the semantic basis");
  const Tensor& first = *features.front();
  Eigen::Index rows = 0;
  for (const Tensor* f : features) {
    if (!f->same_shape(first)) throw Error(ErrorCode::kShapeMismatch, "feature maps differ in shape across runs");
    rows += f->positions();
  }
  Matrix w(rows, first.channels());
  Eigen::Index r = 0;
  for (const Tensor* f : features) {
    w.middleRows(r, f->positions()) = as_matrix(*f);
    r += f->positions();
  }
  SemanticBasis basis;
  basis.t = t;
  basis.mean = w.colwise().mean().transpose();
  w.rowwise() -= basis.mean.transpose();
  const SvdResult svd = jacobi_svd(w);
  basis.singular_values = svd.singular_values;
  const int rank = choose_rank(svd.singular_values, options);
  basis.rows = svd.v.leftCols(rank).transpose();
  return basis;
}

std::vector<SemanticBasis> compute_semantic_basis(std::span<const Trajectory> runs, const BasisOptions& options) {
  if (runs.empty()) throw Error(ErrorCode::kEmptyInput, "no primitive-generation runs");
  const auto& ref = runs.front().steps;
  for (const auto& run : runs) {
    if (run.steps.size() != ref.size()) throw Error(ErrorCode::kShapeMismatch, "runs record different step counts");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (run.steps[i].t != ref[i].t) throw Error(ErrorCode::kShapeMismatch, "runs record different timesteps");
    }
  }
  std::vector<SemanticBasis> out;
  std::vector<const Tensor*> maps(runs.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t j = 0; j < runs.size(); ++j) maps[j] = &runs[j].steps[i].features;
    out.push_back(compute_basis(maps, ref[i].t, options));
  }
  return out;
}

Tensor project_features(const Tensor& features, const SemanticBasis& basis) {
  if (features.channels() != basis.rows.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "feature channels do not match the basis");
  }
  Matrix centred = as_matrix(features);
  centred.rowwise() -= basis.mean.transpose();
  return to_tensor(centred * basis.rows.transpose(), features.height(), features.width());
}

Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double omega) {
  require_same_shape(eps_cond, eps_uncond, "cfg_combine: conditional and unconditional shapes differ");
  Tensor out(eps_cond.height(), eps_cond.width(), eps_cond.channels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 + omega) * eps_cond[i] - omega * eps_uncond[i];
  return out;
}

Prediction CfgDenoiser::predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const {
  Prediction c = base_.predict(x, ts, cond);
  Conditioning null = Conditioning::null(cond.canvas_w, cond.canvas_h);
  null.masked = cond.masked;
  const Prediction u = base_.predict(x, ts, null);
  c.eps = cfg_combine(c.eps, u.eps, omega_);
  return c;
}

Tensor CfgDenoiser::feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                                const Tensor& grad_features) const {
  return base_.feature_vjp(x, ts, cond, grad_features);
}

std::vector<Vector> appearance_stats(const Tensor& coords, const Tensor& features, int count) {
  if (coords.height() != features.height() || coords.width() != features.width()) {
    throw Error(ErrorCode::kShapeMismatch, "coordinates and features differ in grid size");
  }
  if (count < 0 || count > coords.channels()) {
    throw Error(ErrorCode::kRankTooLarge, "more appearance channels requested than coordinates hold");
  }
  const ConstMap s = as_matrix(coords);
  const ConstMap f = as_matrix(features);
  std::vector<Vector> out;
  for (int k = 0; k < count; ++k) {
    const Eigen::VectorXd w = s.col(k).unaryExpr(&sigmoid);
    out.push_back((f.transpose() * w) / w.sum());
  }
  return out;
}

double appearance_energy(const std::vector<Vector>& current, const std::vector<Vector>& reference, int n_a) {
  if (n_a < 1 || current.size() != static_cast<std::size_t>(n_a) || reference.size() != current.size()) {
    throw Error(ErrorCode::kLengthMismatch, "appearance statistics must hold n_a vectors each");
  }
  double total = 0.0;
  for (int k = 0; k < n_a; ++k) {
    if (current[k].size() != reference[k].size()) {
      throw Error(ErrorCode::kShapeMismatch, "appearance statistic dimensions differ");
    }
    total += (current[k] - reference[k]).squaredNorm();
  }
  return total / n_a;
}

double structure_energy_fg(const Tensor& coords, const Tensor& coords_ref, const PolygonMask& mask, bool* empty_mask) {
  require_same_shape(coords, coords_ref, "structure coordinates differ in shape");
  require_grid(coords, mask);
  const auto cells = mask.cells();
  double sum = 0.0;
  std::size_t count = 0;
  for (int p = 0; p < coords.positions(); ++p) {
    if (!cells[p]) continue;
    ++count;
    const auto a = coords.at(p);
    const auto b = coords_ref.at(p);
    for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
  }
  if (empty_mask) *empty_mask = count == 0;
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double structure_energy_bg(const Tensor& coords, const Vector& tau, const PolygonMask& mask, double balance,
                           bool* full_mask) {
  require_grid(coords, mask);
  if (tau.size() != coords.channels()) throw Error(ErrorCode::kShapeMismatch, "threshold length does not match rank");
  const auto cells = mask.cells();
  double sum = 0.0;
  std::size_t count = 0;
  for (int p = 0; p < coords.positions(); ++p) {
    if (cells[p]) continue;
    ++count;
    const auto a = coords.at(p);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double e = std::max(a[k] - tau[static_cast<Eigen::Index>(k)], 0.0);
      sum += e * e;
    }
  }
  if (full_mask) *full_mask = count == 0;
  return count == 0 ? 0.0 : balance * sum / static_cast<double>(count);
}

Vector channel_thresholds(const Tensor& coords) {
  return as_matrix(coords).colwise().maxCoeff().transpose();
}

PolygonMask downsample_mask(const PolygonMask& mask, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::kInvalidArgument, "target grid must be positive");
  if (mask.width() == width && mask.height() == height) return mask;
  const double sx = static_cast<double>(mask.width()) / width;
  const double sy = static_cast<double>(mask.height()) / height;
  auto overlap = [](double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); };
  PolygonMask out(width, height);
  for (int fy = 0; fy < height; ++fy) {
    for (int fx = 0; fx < width; ++fx) {
      const double x0 = fx * sx, x1 = (fx + 1) * sx, y0 = fy * sy, y1 = (fy + 1) * sy;
      double covered = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < std::min(mask.height(), static_cast<int>(std::ceil(y1))); ++y) {
        const double oy = overlap(y0, y1, y, y + 1);
        for (int x = static_cast<int>(std::floor(x0)); x < std::min(mask.width(), static_cast<int>(std::ceil(x1))); ++x) {
          if (mask.at(x, y)) covered += oy * overlap(x0, x1, x, x + 1);
        }
      }
      out.set(fx, fy, covered / (sx * sy) >= 0.5);
    }
  }
  return out;
}

Tensor energy_gradient(const EnergyClosure& energy, const Tensor& x, GradientMode mode, double fd_scale) {
  const double e0 = energy.value(x);
  if (!std::isfinite(e0)) throw Error(ErrorCode::kNonFiniteEnergy, "energy is not finite");
  if (mode == GradientMode::kAnalytic) {
    if (!energy.gradient) throw Error(ErrorCode::kInvalidArgument, "closure has no analytic gradient");
    Tensor g = energy.gradient(x);
    for (double v : g.values()) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteEnergy, "energy gradient is not finite");
    }
    return g;
  }
  double scale = 1.0;
  for (double v : x.values()) scale = std::max(scale, std::abs(v));
  const double h = fd_scale * scale;
  Tensor g(x.height(), x.width(), x.channels());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double plus = energy.value(probe);
    probe[i] = x[i] - h;
    const double minus = energy.value(probe);
    probe[i] = x[i];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw Error(ErrorCode::kNonFiniteEnergy, "energy is not finite near x");
    }
    g[i] = (plus - minus) / (2.0 * h);
  }
  return g;
}

GuidanceObjective::GuidanceObjective(const Denoiser& denoiser, Conditioning cond, Timestep ts, SemanticBasis basis,
                                     std::optional<Tensor> coords_ref, std::vector<Vector> appearance_ref,
                                     PolygonMask mask, double balance, int n_a)
    : denoiser_(denoiser), cond_(std::move(cond)), ts_(ts), basis_(std::move(basis)),
      coords_ref_(std::move(coords_ref)), appearance_ref_(std::move(appearance_ref)), mask_(std::move(mask)),
      balance_(balance), n_a_(n_a) {
  if (coords_ref_) {
    if (coords_ref_->channels() != basis_.rank()) {
      throw Error(ErrorCode::kShapeMismatch, "reference coordinates do not match the basis rank");
    }
    require_grid(*coords_ref_, mask_);
    tau_ = channel_thresholds(*coords_ref_);
  }
  if (!appearance_ref_.empty() && appearance_ref_.size() != static_cast<std::size_t>(n_a_)) {
    throw Error(ErrorCode::kLengthMismatch, "appearance reference must hold n_a vectors");
  }
}

GuidanceEnergies GuidanceObjective::energies_from_features(const Tensor& features) const {
  const Tensor s = project_features(features, basis_);
  GuidanceEnergies e;
  if (coords_ref_) {
    e.g_sf = structure_energy_fg(s, *coords_ref_, mask_);
    e.g_sb = structure_energy_bg(s, tau_, mask_, balance_);
  }
  if (!appearance_ref_.empty()) e.g_a = appearance_energy(appearance_stats(s, features, n_a_), appearance_ref_, n_a_);
  return e;
}

GuidanceEnergies GuidanceObjective::energies(const Tensor& x) const {
  return energies_from_features(denoiser_.predict(x, ts_, cond_).features);
}

double GuidanceObjective::energy(EnergyKind kind, const Tensor& x) const {
  const GuidanceEnergies e = energies(x);
  switch (kind) {
    case EnergyKind::kStructureForeground: return e.g_sf;
    case EnergyKind::kStructureBackground: return e.g_sb;
    case EnergyKind::kAppearance: return e.g_a;
  }
  return 0.0;
}

Tensor GuidanceObjective::feature_gradient(EnergyKind kind, const Tensor& features) const {
  const Tensor s = project_features(features, basis_);
  const ConstMap sm = as_matrix(s);
  const ConstMap f = as_matrix(features);
  const Eigen::Index n = sm.rows();
  const auto cells = mask_.cells();
  Matrix d_s = Matrix::Zero(n, sm.cols());
  Matrix d_f = Matrix::Zero(n, f.cols());

  if (kind == EnergyKind::kStructureForeground && coords_ref_) {
    const ConstMap ref = as_matrix(*coords_ref_);
    const double count = static_cast<double>(mask_.count());
    if (count > 0) {
      for (Eigen::Index p = 0; p < n; ++p) {
        if (cells[static_cast<std::size_t>(p)]) d_s.row(p) = 2.0 * (sm.row(p) - ref.row(p)) / count;
      }
    }
  } else if (kind == EnergyKind::kStructureBackground && coords_ref_) {
    const double count = static_cast<double>(n) - static_cast<double>(mask_.count());
    if (count > 0) {
      for (Eigen::Index p = 0; p < n; ++p) {
        if (cells[static_cast<std::size_t>(p)]) continue;
        for (Eigen::Index k = 0; k < sm.cols(); ++k) {
          d_s(p, k) = 2.0 * balance_ * std::max(sm(p, k) - tau_[k], 0.0) / count;
        }
      }
    }
  } else if (kind == EnergyKind::kAppearance && !appearance_ref_.empty()) {
    for (int k = 0; k < n_a_; ++k) {
      const Eigen::VectorXd w = sm.col(k).unaryExpr(&sigmoid);
      const double z = w.sum();
      const Eigen::VectorXd v = (f.transpose() * w) / z;
      const Eigen::VectorXd g = 2.0 * (v - appearance_ref_[static_cast<std::size_t>(k)]) / n_a_;
      // Direct path through the weighted sum, and through the weights.
      d_f += w * g.transpose() / z;
      const Eigen::VectorXd centred_dot = (f * g).array() - v.dot(g);
      d_s.col(k) += (centred_dot.array() * w.array() * (1.0 - w.array())).matrix() / z;
    }
  }
  d_f += d_s * basis_.rows;
  return to_tensor(d_f, features.height(), features.width());
}

Tensor GuidanceObjective::gradient(EnergyKind kind, const Tensor& x, const Tensor& features) const {
  return denoiser_.feature_vjp(x, ts_, cond_, feature_gradient(kind, features));
}

EnergyClosure GuidanceObjective::closure(EnergyKind kind) const {
  return EnergyClosure{
      [this, kind](const Tensor& x) { return energy(kind, x); },
      [this, kind](const Tensor& x) { return gradient(kind, x, denoiser_.predict(x, ts_, cond_).features); }};
}

void GuidanceConfig::validate() const {
  if (!std::isfinite(omega)) throw Error(ErrorCode::kConfig, "omega must be finite");
  if (!(lambda_s >= 0.0) || !(lambda_a >= 0.0) || !(balance_s >= 0.0)) {
    throw Error(ErrorCode::kConfig, "guidance weights must be non-negative");
  }
  if (n_a < 1) throw Error(ErrorCode::kConfig, "n_a must be >= 1");
  if (sample_steps < 1 || invert_steps < 1) throw Error(ErrorCode::kConfig, "step counts must be >= 1");
  if (guided_steps < 0 || guided_steps > sample_steps) {
    throw Error(ErrorCode::kConfig, "guided_steps must be in 0..sample_steps");
  }
  if (rank < 0 || max_rank < 1 || !(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "rank settings out of range");
  }
  if (!(fd_scale > 0.0) || fixed_point_iters < 0) throw Error(ErrorCode::kConfig, "fd_scale must be > 0");
}

Tensor guided_score(const Tensor& eps_cfg, const Tensor& grad_sf, const Tensor& grad_sb, const Tensor& grad_a,
                    const GuidanceConfig& cfg) {
  require_same_shape(eps_cfg, grad_sf, "guided_score: structure gradient shape");
  require_same_shape(eps_cfg, grad_sb, "guided_score: structure gradient shape");
  require_same_shape(eps_cfg, grad_a, "guided_score: appearance gradient shape");
  Tensor out = eps_cfg;
  if (cfg.lambda_s != 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.lambda_s * (grad_sf[i] + grad_sb[i]);
  }
  if (cfg.lambda_a != 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.lambda_a * grad_a[i];
  }
  return out;
}

std::string diagnostics_to_jsonl(const std::vector<StepDiagnostics>& log) {
  std::string out;
  for (const auto& d : log) {
    nlohmann::json j;
    j["t"] = d.t;
    j["g_sf"] = d.g_sf;
    j["g_sb"] = d.g_sb;
    j["g_a"] = d.g_a;
    j["grad_norms"] = d.grad_norms;
    out += j.dump() + "\n";
  }
  return out;
}

Tensor initial_noise(int height, int width, std::uint64_t seed) {
  return gaussian_noise(height, width, 3, mix_seed(seed, 0));
}

GuidedResult guided_sample(const Denoiser& denoiser, const LayoutScene& scene, const Tensor* condition,
                           const GuidanceConfig& cfg, const NoiseSchedule& schedule, std::uint64_t seed,
                           const std::function<void(const std::string&)>& on_stage) {
  cfg.validate();
  auto stage = [&](const std::string& name) {
    if (on_stage) on_stage(name);
  };
  const int h = scene.canvas_h;
  const int w = scene.canvas_w;
  const Conditioning cond = Conditioning::from_scene(scene);
  const CfgDenoiser cfg_denoiser(denoiser, cfg.omega);

  GuidedResult result;
  result.x_T = initial_noise(h, w, seed);
  const bool guiding = cfg.guided_steps > 0;

  std::vector<Trajectory> runs;
  std::vector<SemanticBasis> bases;
  std::vector<std::optional<Tensor>> coords_ref;
  PolygonMask feature_mask;
  if (guiding) {
    stage("primitive generation");
    for (int j = 0; j < cfg.n_a; ++j) {
      SampleResult run = ddim_sample(cfg_denoiser, cond, schedule, initial_noise(h, w, mix_seed(seed, 1 + j)),
                                     cfg.sample_steps, true);
      result.primitive_images.push_back(std::move(run.x0));
      runs.push_back(std::move(run.trajectory));
    }

    stage("semantic basis");
    BasisOptions opts;
    opts.rank = cfg.rank;
    opts.max_rank = cfg.max_rank;
    opts.energy_fraction = cfg.energy_fraction;
    opts.min_rank = cfg.n_a;
    bases = compute_semantic_basis(runs, opts);
    for (const auto& b : bases) result.ranks.push_back(b.rank());

    const Tensor& f0 = runs.front().steps.front().features;
    PolygonMask union_mask(w, h);
    for (const auto& prim : scene.primitives) {
      const PolygonMask m = rasterize(prim, w, h);
      for (std::size_t i = 0; i < m.size(); ++i) union_mask.cells()[i] |= m.cells()[i];
    }
    feature_mask = downsample_mask(union_mask, f0.width(), f0.height());

    coords_ref.resize(bases.size());
    if (condition != nullptr) {
      stage("inversion");
      if (condition->height() != h || condition->width() != w || condition->channels() != 3) {
        throw Error(ErrorCode::kDimensionMismatch, "spatial condition does not match the scene canvas");
      }
      Conditioning inv_cond = cond;
      if (cfg.inversion_conditioning != InversionConditioning::kScene) inv_cond.primitives.clear();
      if (cfg.inversion_conditioning == InversionConditioning::kNull) inv_cond.caption.clear();
      const InversionResult inv =
          ddim_invert(*condition, denoiser, inv_cond, schedule, {cfg.invert_steps, cfg.fixed_point_iters});
      for (std::size_t i = 0; i < bases.size(); ++i) {
        const TrajectoryStep* step = inv.trajectory.find(bases[i].t);
        if (step == nullptr) {
          throw Error(ErrorCode::kShapeMismatch,
                      "inversion grid has no timestep " + std::to_string(bases[i].t) + " of the sampling grid");
        }
        coords_ref[i] = project_features(step->features, bases[i]);
      }
    }
  }

  stage("guided sampling");
  const std::vector<int> grid = timestep_grid(schedule.steps(), cfg.sample_steps);
  Tensor x = result.x_T;
  const Tensor zero(h, w, 3);
  for (int i = cfg.sample_steps, n = 0; i > 0; --i, ++n) {
    const int t = grid[i];
    const int t_prev = grid[i - 1];
    const Timestep ts{t, schedule.alpha_bar(t)};
    Prediction pred = cfg_denoiser.predict(x, ts, cond);
    Tensor eps = std::move(pred.eps);
    if (n < cfg.guided_steps) {
      const std::size_t bi = static_cast<std::size_t>(n);
      const auto ref_stats = appearance_stats(project_features(runs.front().steps[bi].features, bases[bi]),
                                              runs.front().steps[bi].features, cfg.n_a);
      const GuidanceObjective objective(denoiser, cond, ts, bases[bi], coords_ref[bi], ref_stats, feature_mask,
                                        cfg.balance_s, cfg.n_a);
      const GuidanceEnergies e = objective.energies_from_features(pred.features);
      StepDiagnostics diag{t, e.g_sf, e.g_sb, e.g_a, {}};

      auto grad_of = [&](EnergyKind kind) {
        if (cfg.gradient_mode == GradientMode::kFiniteDifference) {
          return energy_gradient(objective.closure(kind), x, GradientMode::kFiniteDifference, cfg.fd_scale);
        }
        for (double v : {e.g_sf, e.g_sb, e.g_a}) {
          if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteEnergy, "guidance energy is not finite at t=" + std::to_string(t));
        }
        return objective.gradient(kind, x, pred.features);
      };
      const bool structure = cfg.lambda_s != 0.0 && objective.has_structure();
      const Tensor g_sf = structure ? grad_of(EnergyKind::kStructureForeground) : zero;
      const Tensor g_sb = structure ? grad_of(EnergyKind::kStructureBackground) : zero;
      const Tensor g_a = cfg.lambda_a != 0.0 ? grad_of(EnergyKind::kAppearance) : zero;
      diag.grad_norms = {g_sf.norm(), g_sb.norm(), g_a.norm()};
      result.log.push_back(diag);
      eps = guided_score(eps, g_sf, g_sb, g_a, cfg);
    }
    x = ddim_step(x, eps, t, t_prev, schedule);
  }
  result.x0 = std::move(x);
  return result;
}

}  // namespace pathclip
