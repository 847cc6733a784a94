// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
//
//   pathclip_acceptance [--work DIR] [--only 1,2,...]

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "guidance_fixture.hpp"
#include "json.hpp"
#include "pathclip/config.hpp"
#include "pathclip/css.hpp"
#include "pathclip/error.hpp"
#include "pathclip/geometry.hpp"
#include "pathclip/grounding.hpp"
#include "pathclip/io.hpp"
#include "pathclip/pipeline.hpp"
#include "pathclip/polygon_fit.hpp"
#include "pathclip/seed.hpp"
#include "test_support.hpp"

namespace pathclip {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void note(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

double rel_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d) / b.norm();
}

// ---------------------------------------------------------------------------

Outcome css_round_trip() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2026);
  int ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const PathClipPrimitive p = testing::random_canonical_primitive(rng, 64.0);
    const std::string s = serialize_css(p);
    const PathClipPrimitive q = parse_css(s);
    if (q == p && serialize_css(q) == s) ++ok;
  }
  const double t = seconds_since(start);
  return {ok == 1000 && t < 1.0, std::to_string(ok) + "/1000 identical, " + fmt("%.3f s", t) + " (limit 1 s)"};
}

Outcome raster_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  int tested = 0, exact = 0;
  while (tested < 200) {
    const int w = testing::uniform_int(rng, 4, 64);
    const int h = testing::uniform_int(rng, 4, 64);
    const int k = testing::uniform_int(rng, 3, 6);
    std::vector<Point> pts;
    for (int i = 0; i < k; ++i) pts.push_back({testing::uniform(rng, -4, w + 4), testing::uniform(rng, -4, h + 4)});
    const auto norm = normalize_vertices(pts);
    if (polygon_area(norm) <= 0.0) continue;
    ++tested;
    if (rasterize(pts, w, h).count() == testing::brute_force_count(norm, w, h)) ++exact;
  }
  const double t = seconds_since(start);
  return {exact == 200 && t < 10.0,
          std::to_string(exact) + "/200 exact foreground counts, " + fmt("%.2f s", t) + " (limit 10 s)"};
}

Outcome pso_fitting() {
  const auto start = Clock::now();
  std::mt19937_64 rng(3);
  double worst_rect = 1.0, worst_pent = 1.0;
  for (int i = 0; i < 20; ++i) {
    const int x0 = testing::uniform_int(rng, 0, 40), y0 = testing::uniform_int(rng, 0, 40);
    const int x1 = x0 + testing::uniform_int(rng, 8, 64 - x0);
    const int y1 = y0 + testing::uniform_int(rng, 8, 64 - y0);
    const PolygonMask mask = testing::rect_mask(64, 64, x0, y0, x1, y1);
    PsoConfig cfg;
    cfg.k = 4;
    const FitResult fit = fit_polygon(mask, cfg);
    worst_rect = std::min(worst_rect, polygon_iou(rasterize(fit.path.clip_points, 64, 64), mask));
  }
  for (int i = 0; i < 20; ++i) {
    const double r = testing::uniform(rng, 10, 24);
    const auto poly = testing::random_convex_polygon(rng, 5, testing::uniform(rng, r, 64 - r),
                                                     testing::uniform(rng, r, 64 - r), r);
    const PolygonMask mask = rasterize(poly, 64, 64);
    PsoConfig cfg;
    cfg.k = 5;
    const FitResult fit = fit_polygon(mask, cfg);
    worst_pent = std::min(worst_pent, polygon_iou(rasterize(fit.path.clip_points, 64, 64), mask));
  }
  const double t = seconds_since(start);
  return {worst_rect >= 0.95 && worst_pent >= 0.85 && t < 60.0,
          "min IoU rectangles " + fmt("%.4f", worst_rect) + " (>= 0.95), pentagons " + fmt("%.4f", worst_pent) +
              " (>= 0.85), " + fmt("%.1f s", t) + " (limit 60 s)"};
}

// Random instances at two levels: the scene attention operator with one
// primitive's value rows perturbed, and the toy denoiser's features with one
// primitive's appearance tokens replaced.
Outcome attention_locality(const ToyDenoiser& model) {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> normal;
  auto randm = [&](int r, int c) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = normal(rng);
    }
    return m;
  };
  long violations = 0;
  int vacuous = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = testing::uniform_int(rng, 6, 24);
    const int prims = testing::uniform_int(rng, 1, 3);
    const int d = 4, dv = 5, db = 6;  // db > d leaves a null space of wk
    const AttentionProjection proj{randm(db, d), randm(db, dv)};
    std::vector<GroundedTokens> grounded;
    for (int p = 0; p < prims; ++p) {
      const auto poly = testing::random_star_polygon(rng, testing::uniform_int(rng, 4, 6), testing::uniform(rng, 2, n - 2),
                                                     testing::uniform(rng, 2, n - 2), 1.0, n / 2.0);
      GroundedTokens g;
      g.tokens.values = randm(testing::uniform_int(rng, 1, 4), db);
      g.mask = rasterize(poly, n, n);
      grounded.push_back(std::move(g));
    }
    FusedEmbedding global;
    global.values = randm(2, db);
    const Matrix q = randm(n * n, d);
    const Matrix before = compose_scene_attention(q, grounded, global, proj);

    const int j = testing::uniform_int(rng, 0, prims - 1);
    std::vector<GroundedTokens> changed = grounded;
    // Moving tokens along the null space of wk changes V but not K.
    const Eigen::JacobiSVD<Matrix> svd(proj.wk.transpose(), Eigen::ComputeFullV);
    const Vector null_dir = svd.matrixV().col(db - 1);
    for (int r = 0; r < changed[static_cast<std::size_t>(j)].tokens.values.rows(); ++r) {
      changed[static_cast<std::size_t>(j)].tokens.values.row(r) += 3.0 * normal(rng) * null_dir.transpose();
    }
    const Matrix after = compose_scene_attention(q, changed, global, proj);
    const auto& mask = grounded[static_cast<std::size_t>(j)].mask;
    bool any_inside = false;
    for (int p = 0; p < n * n; ++p) {
      const bool differs = (after.row(p) - before.row(p)).cwiseAbs().maxCoeff() != 0.0;
      if (mask.cells()[static_cast<std::size_t>(p)]) {
        any_inside |= differs;
      } else if (differs) {
        ++violations;
      }
    }
    if (!any_inside && mask.count() > 0) ++vacuous;

    // Model level: replace primitive j's appearance tokens.
    std::mt19937_64 srng(mix_seed(404, inst));
    SyntheticSample s = make_synthetic_sample(srng, testing::uniform_int(rng, 1, 3), {});
    const std::size_t pj = static_cast<std::size_t>(testing::uniform_int(rng, 0, int(s.scene.primitives.size()) - 1));
    LayoutScene other = s.scene;
    other.primitives[pj].appearance.tokens = {"blob", "white", "striped"};
    const Tensor x = gaussian_noise(32, 32, 3, mix_seed(405, inst));
    const Timestep ts{testing::uniform_int(rng, 1, 100), 0.5};
    const Tensor fa = model.predict(x, ts, Conditioning::from_scene(s.scene)).features;
    const Tensor fb = model.predict(x, ts, Conditioning::from_scene(other)).features;
    const PolygonMask pm = downsample_mask(rasterize(s.scene.primitives[pj], 32, 32), fa.width(), fa.height());
    for (int p = 0; p < fa.width() * fa.height(); ++p) {
      bool differs = false;
      for (int c = 0; c < fa.channels(); ++c) {
        differs |= fa.at(p)[static_cast<std::size_t>(c)] != fb.at(p)[static_cast<std::size_t>(c)];
      }
      if (differs && !pm.cells()[static_cast<std::size_t>(p)]) ++violations;
    }
  }
  return {violations == 0 && vacuous == 0,
          std::to_string(violations) + " positions changed outside the perturbed mask over 50 operator + 50 model "
                                       "instances; " +
              std::to_string(vacuous) + " instances with no change inside"};
}

Outcome gaussian_oracle() {
  const NoiseSchedule s = NoiseSchedule::cosine(100);
  std::mt19937_64 rng(55);
  const int D = 16;
  std::vector<double> mu(D), var(D);
  for (int d = 0; d < D; ++d) {
    mu[static_cast<std::size_t>(d)] = testing::uniform(rng, -1.0, 1.0);
    var[static_cast<std::size_t>(d)] = testing::uniform(rng, 0.25, 2.0);
  }
  const GaussianDenoiser g(mu, var);
  const Conditioning none = Conditioning::null(1, 1);
  double worst_rt = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x0(D, 1, 1);
    for (int d = 0; d < D; ++d) {
      x0[static_cast<std::size_t>(d)] = mu[static_cast<std::size_t>(d)] +
                                        std::sqrt(var[static_cast<std::size_t>(d)]) * std::normal_distribution<>()(rng);
    }
    const InversionResult inv = ddim_invert(x0, g, none, s, {100, 2});
    const Tensor back = ddim_sample(g, none, s, inv.x_T, 100, false).x0;
    worst_rt = std::max(worst_rt, rel_diff(back, x0));
  }

  // Moments from 512 whitened starting points.
  const int n = 512, M = 4;
  const std::vector<double> mm = {0.5, -1.0, 2.0, 0.8};
  const std::vector<double> vv = {0.25, 1.0, 0.5, 2.5};
  const GaussianDenoiser gm(mm, vv);
  Eigen::MatrixXd z(n, M);
  std::normal_distribution<double> normal;
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < M; ++d) z(i, d) = normal(rng);
  }
  z.rowwise() -= z.colwise().mean();
  const Eigen::MatrixXd cz = z.transpose() * z / n;
  const Eigen::MatrixXd l = cz.llt().matrixL();
  z = l.triangularView<Eigen::Lower>().solve(z.transpose()).transpose();
  Eigen::MatrixXd out(n, M);
  for (int i = 0; i < n; ++i) {
    Tensor xT(M, 1, 1);
    for (int d = 0; d < M; ++d) xT[static_cast<std::size_t>(d)] = z(i, d);
    const Tensor x0 = ddim_sample(gm, none, s, xT, 100, false).x0;
    for (int d = 0; d < M; ++d) out(i, d) = x0[static_cast<std::size_t>(d)];
  }
  const Eigen::RowVectorXd mean = out.colwise().mean();
  const Eigen::MatrixXd centered = out.rowwise() - mean;
  const Eigen::MatrixXd c = centered.transpose() * centered / n;
  double worst_mean = 0.0, worst_var = 0.0, worst_cov = 0.0;
  for (int d = 0; d < M; ++d) {
    const double md = mm[static_cast<std::size_t>(d)], vd = vv[static_cast<std::size_t>(d)];
    worst_mean = std::max(worst_mean, std::abs(mean(d) - md) / std::abs(md));
    worst_var = std::max(worst_var, std::abs(c(d, d) - vd) / vd);
    for (int e = 0; e < M; ++e) {
      if (e != d) worst_cov = std::max(worst_cov, std::abs(c(d, e)) / std::sqrt(vd * vv[static_cast<std::size_t>(e)]));
    }
  }
  const bool pass = worst_rt <= 1e-2 && worst_mean <= 0.05 && worst_var <= 0.05 && worst_cov <= 0.05;
  return {pass, "round trip max rel L2 " + fmt("%.2e", worst_rt) + " (<= 1e-2); moments max rel error mean " +
                    fmt("%.4f", worst_mean) + ", var " + fmt("%.4f", worst_var) + ", cross-cov " +
                    fmt("%.4f", worst_cov) + " (<= 0.05)"};
}

Outcome svd_correctness() {
  std::mt19937_64 rng(66);
  std::normal_distribution<double> normal;
  double worst_orth = 0.0, worst_energy = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(100, 16);
    // Decaying column scales so the energy curve is non-trivial.
    for (int i = 0; i < 100; ++i) {
      for (int j = 0; j < 16; ++j) a(i, j) = normal(rng) * std::pow(0.8, j);
    }
    const Matrix rot = Eigen::HouseholderQR<Matrix>(Matrix::NullaryExpr(16, 16, [&] { return normal(rng); }))
                           .householderQ();
    a = a * rot;
    const SvdResult svd = jacobi_svd(a);
    worst_orth = std::max(worst_orth, (svd.v.transpose() * svd.v - Matrix::Identity(16, 16)).cwiseAbs().maxCoeff());
    const std::vector<double> energy = retained_energy(svd.singular_values);

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(a.transpose() * a);
    std::vector<double> lam(eig.eigenvalues().data(), eig.eigenvalues().data() + 16);
    std::sort(lam.rbegin(), lam.rend());
    double total = 0.0;
    for (double v : lam) total += std::max(v, 0.0);
    double acc = 0.0;
    for (std::size_t r = 0; r < 16; ++r) {
      acc += std::max(lam[r], 0.0);
      worst_energy = std::max(worst_energy, std::abs(energy[r] - acc / total));
    }

    // The basis used for guidance must be orthonormal as well.
    std::vector<Tensor> feats;
    Tensor f(10, 10, 16);
    for (int i = 0; i < 100; ++i) {
      for (int j = 0; j < 16; ++j) f.at(i)[static_cast<std::size_t>(j)] = a(i, j);
    }
    feats.push_back(f);
    std::vector<const Tensor*> ptrs = {&feats[0]};
    BasisOptions opts;
    opts.rank = 8;
    const SemanticBasis b = compute_basis(ptrs, 1, opts);
    worst_orth = std::max(worst_orth,
                          (b.rows * b.rows.transpose() - Matrix::Identity(b.rank(), b.rank())).cwiseAbs().maxCoeff());
  }
  return {worst_orth <= 1e-6 && worst_energy <= 1e-8,
          "max orthonormality defect " + fmt("%.2e", worst_orth) + " (<= 1e-6), max energy-fraction error " +
              fmt("%.2e", worst_energy) + " (<= 1e-8) on 20 random 100x16 matrices"};
}

Outcome gradient_checks(const ToyDenoiser& model) {
  const PipelineConfig cfg;
  const NoiseSchedule schedule = cfg.make_schedule();
  std::mt19937_64 srng(mix_seed(707, 1));
  const LayoutScene scene = make_synthetic_sample(srng, 2, {}).scene;
  const testing::GuidanceSetup setup = testing::make_guidance_setup(model, scene, schedule, 50, 31);
  std::mt19937_64 rng(708);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  int probes = 0;
  for (std::size_t step : {std::size_t{5}, std::size_t{25}, std::size_t{45}}) {
    const GuidanceObjective obj = testing::make_objective(model, setup, schedule, step);
    const Tensor& x = setup.runs[1].steps[step].x;
    for (auto kind : {EnergyKind::kAppearance, EnergyKind::kStructureForeground, EnergyKind::kStructureBackground}) {
      const EnergyClosure c = obj.closure(kind);
      const Tensor g = energy_gradient(c, x, GradientMode::kAnalytic);
      for (int p = 0; p < 5; ++p) {
        Tensor dir(x.height(), x.width(), x.channels());
        for (auto& v : dir.values()) v = normal(rng);
        const double dn = dir.norm();
        for (auto& v : dir.values()) v /= dn;
        const double h = 1e-4;
        Tensor xp = x, xm = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
          xp[i] += h * dir[i];
          xm[i] -= h * dir[i];
        }
        const double fd = (c.value(xp) - c.value(xm)) / (2 * h);
        double an = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) an += g[i] * dir[i];
        const double rel = std::abs(an - fd) / std::max({std::abs(fd), std::abs(an), 1e-12});
        worst = std::max(worst, rel);
        ++probes;
      }
    }
  }
  return {worst <= 1e-4 && probes == 45,
          std::to_string(probes) + " directional probes (3 energies x 5 probes x t in {" +
              std::to_string(setup.grid[5]) + "," + std::to_string(setup.grid[25]) + "," +
              std::to_string(setup.grid[45]) + "}) on the trained model, max relative error " + fmt("%.2e", worst) +
              " (<= 1e-4)"};
}

Outcome energy_zero_cases() {
  std::mt19937_64 rng(88);
  bool all_zero = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int h = testing::uniform_int(rng, 2, 12), w = testing::uniform_int(rng, 2, 12), r = testing::uniform_int(rng, 1, 6);
    const Tensor coords = gaussian_noise(h, w, r, rng());
    const Tensor feats = gaussian_noise(h, w, 2 * r, rng());
    const int n_a = std::min(r, 2);
    const auto stats = appearance_stats(coords, feats, n_a);
    PolygonMask mask(w, h);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.cells()[i] = (rng() & 1U) != 0U;
    bool empty = false, full = false;
    all_zero &= appearance_energy(stats, stats, n_a) == 0.0;
    all_zero &= structure_energy_fg(coords, coords, mask, &empty) == 0.0;
    const Vector tau = channel_thresholds(coords);
    all_zero &= structure_energy_bg(coords, tau, mask, 1.0, &full) == 0.0;
    Vector above = tau.array() + 0.5;
    all_zero &= structure_energy_bg(coords, above, mask, 1.0, &full) == 0.0;
  }
  return {all_zero, all_zero ? "appearance, foreground and background energies exactly 0.0 on 20 random cases"
                             : "a zero case returned a non-zero energy"};
}

struct DemoRun {
  double seconds = 0.0;
  double median_precision = 0.0;
  double median_recall = 0.0;
  fs::path model;
};

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const DemoRun& demo(std::uint64_t seed) {
    auto it = demos_.find(seed);
    if (it != demos_.end()) return it->second;
    const fs::path dir = root_ / ("demo_seed" + std::to_string(seed));
    fs::remove_all(dir);
    PipelineConfig cfg;
    note("demo seed " + std::to_string(seed) + " -> " + dir.string());
    const auto start = Clock::now();
    const std::string report = run_demo(cfg, seed, dir, [](const std::string& stage, int step, int total, double) {
      if (total == 0 || step == total) note("[" + stage + "]" + (total ? " done" : ""));
    });
    DemoRun run;
    run.seconds = seconds_since(start);
    const auto j = nlohmann::json::parse(report);
    run.median_precision = j.at("adherence").at("median_precision").get<double>();
    run.median_recall = j.at("adherence").at("median_recall").get<double>();
    run.model = dir / "model.bin";
    note("demo seed " + std::to_string(seed) + ": " + fmt("%.1f s", run.seconds) + ", median P " +
         fmt("%.3f", run.median_precision) + ", R " + fmt("%.3f", run.median_recall));
    return demos_.emplace(seed, run).first->second;
  }

  const ToyDenoiser& model(std::uint64_t seed) {
    auto it = models_.find(seed);
    if (it != models_.end()) return it->second;
    return models_.emplace(seed, ToyDenoiser::load(demo(seed).model)).first->second;
  }

 private:
  fs::path root_;
  std::map<std::uint64_t, DemoRun> demos_;
  std::map<std::uint64_t, ToyDenoiser> models_;
};

Outcome guidance_efficacy(const ToyDenoiser& model) {
  const PipelineConfig cfg;
  const NoiseSchedule schedule = cfg.make_schedule();
  std::vector<double> ratios;
  bool identical = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(mix_seed(909, seed));
    const LayoutScene scene = make_synthetic_sample(rng, 2, cfg.synthetic).scene;
    const Tensor condition = to_model_range(render_scene(recolor_scene(scene)));
    const GuidedResult guided = guided_sample(model, scene, &condition, cfg.guidance, schedule, seed);
    GuidanceConfig off = cfg.guidance;
    off.lambda_s = 0.0;
    off.lambda_a = 0.0;
    const GuidedResult plain = guided_sample(model, scene, &condition, off, schedule, seed);
    ratios.push_back(guided.log.back().g_sf / plain.log.back().g_sf);
    note("seed " + std::to_string(seed) + " final g_sf " + fmt("%.4g", guided.log.back().g_sf) + " vs " +
         fmt("%.4g", plain.log.back().g_sf));
    if (seed <= 3) {
      const CfgDenoiser cfg_model(model, off.omega);
      const SampleResult ref = ddim_sample(cfg_model, Conditioning::from_scene(scene), schedule,
                                           initial_noise(32, 32, seed), off.sample_steps, false);
      identical &= plain.x0 == ref.x0;
    }
  }
  const double med = median(ratios);
  return {med <= 0.2 && identical, "median final g_sf guided/unguided " + fmt("%.4f", med) +
                                       " over 20 seeds (<= 0.2); guidance-off bit-identical to CFG sampling: " +
                                       (identical ? "yes" : "no")};
}

Outcome layout_adherence(Workspace& ws) {
  std::vector<double> p, r;
  double slowest = 0.0;
  bool each = true;
  std::string per_seed;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const DemoRun& d = ws.demo(seed);
    p.push_back(d.median_precision);
    r.push_back(d.median_recall);
    slowest = std::max(slowest, d.seconds);
    each &= d.median_precision >= 0.8 && d.median_recall >= 0.8;
    per_seed += " seed " + std::to_string(seed) + " P " + fmt("%.2f", d.median_precision) + " R " +
                fmt("%.2f", d.median_recall) + ";";
  }
  return {each && slowest <= 600.0, "median precision/recall over 50 two-primitive scenes:" + per_seed +
                                        " slowest demo " + fmt("%.0f s", slowest) + " (limit 600 s)"};
}

Outcome mask_ablation(Workspace& ws) {
  PipelineConfig unmasked_cfg;
  unmasked_cfg.model.masked_attention = false;
  std::vector<double> masked, unmasked;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    masked.push_back(ws.demo(seed).median_recall);
    note("training unmasked model, seed " + std::to_string(seed));
    const ToyDenoiser model = train_model(unmasked_cfg, seed).model;
    const AdherenceSummary s = evaluate_model(model, unmasked_cfg, seed);
    unmasked.push_back(s.median_recall);
    note("unmasked seed " + std::to_string(seed) + " median recall " + fmt("%.3f", s.median_recall));
  }
  const double m = median(masked), u = median(unmasked);
  return {m >= u, "median recall masked " + fmt("%.3f", m) + " vs unmasked " + fmt("%.3f", u) +
                      " (3 seeds, 50 scenes each, same scenes and noise per seed)"};
}

}  // namespace
}  // namespace pathclip

int main(int argc, char** argv) {
  using namespace pathclip;
  fs::path work = fs::current_path() / "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  Workspace ws(work);
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"CSS grammar round trip", [] { return css_round_trip(); }}},
      {2, {"rasterization oracle", [] { return raster_oracle(); }}},
      {3, {"PSO fitting", [] { return pso_fitting(); }}},
      {4, {"masked-attention locality", [&] { return attention_locality(ws.model(1)); }}},
      {5, {"DDIM Gaussian oracle", [] { return gaussian_oracle(); }}},
      {6, {"SVD correctness", [] { return svd_correctness(); }}},
      {7, {"energy gradient checks", [&] { return gradient_checks(ws.model(1)); }}},
      {8, {"energy zero cases", [] { return energy_zero_cases(); }}},
      {9, {"guidance efficacy", [&] { return guidance_efficacy(ws.model(1)); }}},
      {10, {"layout adherence and demo time", [&] { return layout_adherence(ws); }}},
      {11, {"mask ablation direction", [&] { return mask_ablation(ws); }}},
  };
  // Fast criteria first, then the trained-model ones; results print in order.
  const std::vector<int> order = {1, 2, 3, 5, 6, 8, 10, 4, 7, 9, 11};
  std::map<int, Outcome> results;
  for (int id : order) {
    if (!only.empty() && only.count(id) == 0) continue;
    const auto& [name, fn] = criteria.at(id);
    std::fprintf(stderr, "running #%d %s\n", id, name.c_str());
    const auto start = Clock::now();
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
    std::fprintf(stderr, "  #%d finished in %.1f s\n", id, seconds_since(start));
  }
  int failed = 0;
  for (const auto& [id, r] : results) {
    std::printf("%s  #%-2d %s: %s\n", r.pass ? "PASS" : "FAIL", id, criteria.at(id).first.c_str(), r.detail.c_str());
    failed += r.pass ? 0 : 1;
  }
  std::printf("%zu criteria run, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
