// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/toy_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "pathclip/error.hpp"

namespace pathclip {
namespace {

constexpr std::uint32_t kToyMagic = detail::fourcc('P', 'C', 'T', 'D');
constexpr std::uint32_t kToyVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

using ConstMap = Eigen::Map<const Matrix>;

// Rows are positions; columns are the 3x3 zero-padded neighbourhood (ky, kx, c).
// Writes into `cols`, reusing its storage.
void im2col(const double* in, int h, int w, int c, Matrix& cols) {
  cols.resize(static_cast<Eigen::Index>(h) * w, 9 * c);
  cols.setZero();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* row = cols.data() + (static_cast<std::size_t>(y) * w + x) * 9 * c;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= w) continue;
          std::copy_n(in + (static_cast<std::size_t>(sy) * w + sx) * c, c, row + (ky * 3 + kx) * c);
        }
      }
    }
  }
}

// Adjoint of im2col.
Matrix col2im(const Matrix& cols, int h, int w, int c) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(h) * w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* row = cols.data() + (static_cast<std::size_t>(y) * w + x) * 9 * c;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= w) continue;
          double* dst = out.data() + (static_cast<std::size_t>(sy) * w + sx) * c;
          const double* src = row + (ky * 3 + kx) * c;
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
      }
    }
  }
  return out;
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::span<double> span_of(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Tensor tensor_from(const Matrix& m, int h, int w) {
  Tensor t(h, w, static_cast<int>(m.cols()));
  std::copy_n(m.data(), m.size(), t.storage().data());
  return t;
}

Matrix time_features(double alpha_bar, int freqs) {
  const double s = std::sqrt(alpha_bar);
  const PathEmbedding e = fourier_encode(std::span<const double>(&s, 1), freqs);
  return e.values.transpose();
}

}  // namespace

void ToyModelConfig::validate() const {
  if (image_size < 4 || channels < 1 || attn_dim < 1 || fusion_dim < 1 || text_dim < 1 || num_freqs < 1 ||
      time_freqs < 1) {
    throw Error(ErrorCode::kConfig, "toy model dimensions must be positive (image_size >= 4)");
  }
}

ToyParameters ToyParameters::random(const ToyModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int c = cfg.channels;
  ToyParameters p;
  p.conv1_w = random_matrix(rng, 27, c, std::sqrt(2.0 / 27.0));
  p.conv1_b = Matrix::Zero(1, c);
  p.time_w = random_matrix(rng, 2 * cfg.time_freqs, c, std::sqrt(1.0 / (2 * cfg.time_freqs)));
  p.wq = random_matrix(rng, c, cfg.attn_dim, std::sqrt(1.0 / c));
  p.wk = random_matrix(rng, cfg.fusion_dim, cfg.attn_dim, std::sqrt(1.0 / cfg.fusion_dim));
  p.wv = random_matrix(rng, cfg.fusion_dim, c, std::sqrt(1.0 / cfg.fusion_dim));
  p.conv2_w = random_matrix(rng, 9 * c, c, std::sqrt(2.0 / (9.0 * c)));
  p.conv2_b = Matrix::Zero(1, c);
  p.head_w = random_matrix(rng, c, 3, std::sqrt(1.0 / c));
  p.head_b = Matrix::Zero(1, 3);
  p.fusion = FusionNetwork::random(cfg.fusion_input_dim(), cfg.fusion_dim, rng(), Activation::kSilu);
  return p;
}

ToyParameters ToyParameters::zeros_like() const {
  ToyParameters z;
  z.conv1_w = Matrix::Zero(conv1_w.rows(), conv1_w.cols());
  z.conv1_b = Matrix::Zero(conv1_b.rows(), conv1_b.cols());
  z.time_w = Matrix::Zero(time_w.rows(), time_w.cols());
  z.wq = Matrix::Zero(wq.rows(), wq.cols());
  z.wk = Matrix::Zero(wk.rows(), wk.cols());
  z.wv = Matrix::Zero(wv.rows(), wv.cols());
  z.conv2_w = Matrix::Zero(conv2_w.rows(), conv2_w.cols());
  z.conv2_b = Matrix::Zero(conv2_b.rows(), conv2_b.cols());
  z.head_w = Matrix::Zero(head_w.rows(), head_w.cols());
  z.head_b = Matrix::Zero(head_b.rows(), head_b.cols());
  z.fusion = FusionNetwork(Matrix::Zero(fusion.w1().rows(), fusion.w1().cols()), Vector::Zero(fusion.b1().size()),
                           Matrix::Zero(fusion.w2().rows(), fusion.w2().cols()), Vector::Zero(fusion.b2().size()),
                           fusion.activation());
  return z;
}

std::vector<std::span<double>> ToyParameters::tensors() {
  return {span_of(conv1_w), span_of(conv1_b), span_of(time_w),      span_of(wq),
          span_of(wk),      span_of(wv),      span_of(conv2_w),     span_of(conv2_b),
          span_of(head_w),  span_of(head_b),  span_of(fusion.w1()), span_of(fusion.b1()),
          span_of(fusion.w2()), span_of(fusion.b2())};
}

std::vector<std::span<const double>> ToyParameters::tensors() const {
  auto spans = const_cast<ToyParameters*>(this)->tensors();
  return {spans.begin(), spans.end()};
}

struct ToyDenoiser::Cache {
  struct Group {
    Matrix hidden_pre;
    Matrix tokens;
    Matrix k;
    Matrix v;
    Matrix p;
  };
  const EncodedConditioning* cond = nullptr;
  Matrix temb;
  Matrix x_cols;
  Matrix h0_pre;
  Matrix h0;
  Matrix q;
  std::vector<Group> groups;
  Matrix h1;
  Matrix h1_cols;
  Matrix z;
  Matrix h2;
  Matrix x0;
};

ToyDenoiser::ToyDenoiser(ToyModelConfig config, ToyParameters params)
    : config_(config), params_(std::move(params)), text_(config.text_dim, config.text_seed) {
  config_.validate();
  const int c = config_.channels;
  const bool ok = params_.conv1_w.rows() == 27 && params_.conv1_w.cols() == c && params_.conv1_b.cols() == c &&
                  params_.time_w.rows() == 2 * config_.time_freqs && params_.time_w.cols() == c &&
                  params_.wq.rows() == c && params_.wq.cols() == config_.attn_dim &&
                  params_.wk.rows() == config_.fusion_dim && params_.wk.cols() == config_.attn_dim &&
                  params_.wv.rows() == config_.fusion_dim && params_.wv.cols() == c &&
                  params_.conv2_w.rows() == 9 * c && params_.conv2_w.cols() == c && params_.conv2_b.cols() == c &&
                  params_.head_w.rows() == c && params_.head_w.cols() == 3 && params_.head_b.cols() == 3 &&
                  params_.fusion.input_dim() == config_.fusion_input_dim() &&
                  params_.fusion.output_dim() == config_.fusion_dim;
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, "toy parameters do not match the model configuration");
}

ToyDenoiser ToyDenoiser::random(const ToyModelConfig& config, std::uint64_t seed) {
  return ToyDenoiser(config, ToyParameters::random(config, seed));
}

EncodedConditioning ToyDenoiser::encode(const Conditioning& cond) const {
  const int n = config_.image_size;
  if (cond.canvas_w != n || cond.canvas_h != n) {
    throw Error(ErrorCode::kDimensionMismatch, "conditioning canvas " + std::to_string(cond.canvas_w) + "x" +
                                                   std::to_string(cond.canvas_h) + " does not match the " +
                                                   std::to_string(n) + "x" + std::to_string(n) + " model");
  }
  const auto positions = static_cast<std::size_t>(n) * n;

  auto group_inputs = [&](const std::vector<std::string>& tokens, const PathParams& path) {
    const AppearanceEmbedding e_theta = text_.encode(tokens);
    const std::vector<double> tau = path_vector(path, n, n);
    const PathEmbedding e_tau = fourier_encode(tau, config_.num_freqs);
    Matrix in(e_theta.values.rows(), config_.fusion_input_dim());
    for (Eigen::Index l = 0; l < in.rows(); ++l) {
      in.row(l).head(config_.text_dim) = e_theta.values.row(l);
      in.row(l).tail(e_tau.values.size()) = e_tau.values.transpose();
    }
    return in;
  };

  const PathParams canvas_path = PathParams::from_points(
      {{0.0, 0.0}, {static_cast<double>(n), 0.0}, {static_cast<double>(n), static_cast<double>(n)},
       {0.0, static_cast<double>(n)}});
  const std::vector<std::string> caption_tokens =
      cond.caption.empty() ? std::vector<std::string>{kNullToken} : AppearanceDescription::from_text(cond.caption).tokens;

  EncodedConditioning out;
  TokenGroup global{group_inputs(caption_tokens, canvas_path), std::vector<double>(positions, 1.0)};

  if (!cond.masked || !config_.masked_attention) {
    std::vector<Matrix> parts{global.inputs};
    Eigen::Index rows = global.inputs.rows();
    for (const auto& prim : cond.primitives) {
      parts.push_back(group_inputs(prim.appearance.tokens, prim.path));
      rows += parts.back().rows();
    }
    Matrix all(rows, config_.fusion_input_dim());
    Eigen::Index r = 0;
    for (const auto& m : parts) {
      all.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    out.groups.push_back({std::move(all), std::move(global.weight)});
    return out;
  }

  std::vector<std::uint8_t> covered(positions, 0);
  for (const auto& prim : cond.primitives) {
    const PolygonMask mask = rasterize(prim, n, n);
    const auto cells = mask.cells();
    TokenGroup g{group_inputs(prim.appearance.tokens, prim.path), std::vector<double>(positions, 0.0)};
    for (std::size_t i = 0; i < positions; ++i) {
      g.weight[i] = cells[i] ? 1.0 : 0.0;
      covered[i] |= cells[i];
    }
    out.groups.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < positions; ++i) global.weight[i] = covered[i] ? 0.0 : 1.0;
  out.groups.push_back(std::move(global));
  return out;
}

void ToyDenoiser::forward(const Tensor& x, double alpha_bar, const EncodedConditioning& cond, Cache& cache,
                          bool full) const {
  const int n = config_.image_size;
  if (x.height() != n || x.width() != n || x.channels() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "toy denoiser expects a " + std::to_string(n) + "x" + std::to_string(n) +
                                               "x3 input");
  }
  const auto& p = params_;
  cache.cond = &cond;
  cache.temb = time_features(alpha_bar, config_.time_freqs);
  im2col(x.storage().data(), n, n, 3, cache.x_cols);
  cache.h0_pre.noalias() = cache.x_cols * p.conv1_w;
  const Matrix bias = p.conv1_b + cache.temb * p.time_w;
  cache.h0_pre.rowwise() += bias.row(0);
  cache.h0 = cache.h0_pre.unaryExpr(&silu);
  cache.q.noalias() = cache.h0 * p.wq;

  Matrix attn = Matrix::Zero(cache.h0.rows(), cache.h0.cols());
  cache.groups.clear();
  for (const auto& g : cond.groups) {
    Cache::Group cg;
    cg.tokens = p.fusion.forward(g.inputs, cg.hidden_pre);
    cg.k = cg.tokens * p.wk;
    cg.v = cg.tokens * p.wv;
    cg.p = attention_weights(cache.q, cg.k);
    const Matrix o = cg.p * cg.v;
    for (Eigen::Index i = 0; i < attn.rows(); ++i) {
      if (g.weight[static_cast<std::size_t>(i)] != 0.0) attn.row(i) += g.weight[static_cast<std::size_t>(i)] * o.row(i);
    }
    cache.groups.push_back(std::move(cg));
  }
  cache.h1 = cache.h0 + attn;
  if (!full) return;

  im2col(cache.h1.data(), n, n, config_.channels, cache.h1_cols);
  cache.z.noalias() = cache.h1_cols * p.conv2_w;
  cache.z.rowwise() += p.conv2_b.row(0);
  cache.h2 = cache.z.unaryExpr(&silu);
  cache.x0.noalias() = cache.h2 * p.head_w;
  cache.x0.rowwise() += p.head_b.row(0);
}

Matrix ToyDenoiser::backward_features(const Cache& cache, const Matrix& d_h1, ToyParameters* grad,
                                      bool want_dx) const {
  const auto& p = params_;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.attn_dim));
  Matrix d_h0 = d_h1;
  Matrix d_q = Matrix::Zero(cache.q.rows(), cache.q.cols());

  for (std::size_t gi = 0; gi < cache.groups.size(); ++gi) {
    const auto& g = cache.cond->groups[gi];
    const auto& cg = cache.groups[gi];
    Matrix d_o = d_h1;
    for (Eigen::Index i = 0; i < d_o.rows(); ++i) d_o.row(i) *= g.weight[static_cast<std::size_t>(i)];
    const Matrix d_p = d_o * cg.v.transpose();
    Matrix d_s = cg.p.cwiseProduct(d_p);
    const Eigen::VectorXd row_dot = d_s.rowwise().sum();
    d_s -= cg.p.cwiseProduct(row_dot.replicate(1, d_s.cols()));
    d_s *= inv_sqrt_d;
    d_q += d_s * cg.k;
    if (grad == nullptr) continue;

    const Matrix d_v = cg.p.transpose() * d_o;
    const Matrix d_k = d_s.transpose() * cache.q;
    grad->wk += cg.tokens.transpose() * d_k;
    grad->wv += cg.tokens.transpose() * d_v;
    const Matrix d_tokens = d_k * p.wk.transpose() + d_v * p.wv.transpose();
    const Activation act = p.fusion.activation();
    const Matrix hidden = cg.hidden_pre.unaryExpr([act](double v) { return activate(act, v); });
    grad->fusion.w2() += d_tokens.transpose() * hidden;
    grad->fusion.b2() += d_tokens.colwise().sum().transpose();
    const Matrix d_pre =
        (d_tokens * p.fusion.w2()).cwiseProduct(cg.hidden_pre.unaryExpr([act](double v) {
          return activate_derivative(act, v);
        }));
    grad->fusion.w1() += d_pre.transpose() * g.inputs;
    grad->fusion.b1() += d_pre.colwise().sum().transpose();
  }

  d_h0 += d_q * p.wq.transpose();
  if (grad != nullptr) grad->wq += cache.h0.transpose() * d_q;
  const Matrix d_h0_pre = d_h0.cwiseProduct(cache.h0_pre.unaryExpr(&silu_grad));
  if (grad != nullptr) {
    grad->conv1_w += cache.x_cols.transpose() * d_h0_pre;
    const Matrix col_sum = d_h0_pre.colwise().sum();
    grad->conv1_b += col_sum;
    grad->time_w += cache.temb.transpose() * col_sum;
  }
  if (!want_dx) return {};
  const int n = config_.image_size;
  return col2im(d_h0_pre * p.conv1_w.transpose(), n, n, 3);
}

Prediction ToyDenoiser::predict(const Tensor& x, const Timestep& ts, const EncodedConditioning& cond) const {
  Cache cache;
  forward(x, ts.alpha_bar, cond, cache, true);
  const int n = config_.image_size;
  Prediction pred;
  pred.features = tensor_from(cache.h1, n, n);
  pred.eps = Tensor(n, n, 3);
  if (ts.alpha_bar >= 1.0) return pred;  // no noise present
  const double sa = std::sqrt(ts.alpha_bar);
  const double s1a = std::sqrt(1.0 - ts.alpha_bar);
  for (std::size_t i = 0; i < pred.eps.size(); ++i) pred.eps[i] = (x[i] - sa * cache.x0.data()[i]) / s1a;
  return pred;
}

Prediction ToyDenoiser::predict(const Tensor& x, const Timestep& ts, const Conditioning& cond) const {
  const EncodedConditioning enc = encode(cond);
  return predict(x, ts, enc);
}

Tensor ToyDenoiser::predict_x0(const Tensor& x, const Timestep& ts, const Conditioning& cond) const {
  const EncodedConditioning enc = encode(cond);
  Cache cache;
  forward(x, ts.alpha_bar, enc, cache, true);
  return tensor_from(cache.x0, config_.image_size, config_.image_size);
}

Tensor ToyDenoiser::feature_vjp(const Tensor& x, const Timestep& ts, const Conditioning& cond,
                                const Tensor& grad_features) const {
  const int n = config_.image_size;
  if (grad_features.height() != n || grad_features.width() != n || grad_features.channels() != config_.channels) {
    throw Error(ErrorCode::kShapeMismatch, "feature gradient does not match the feature map shape");
  }
  const EncodedConditioning enc = encode(cond);
  Cache cache;
  forward(x, ts.alpha_bar, enc, cache, false);
  const Matrix d_h1 = ConstMap(grad_features.storage().data(), cache.h1.rows(), cache.h1.cols());
  return tensor_from(backward_features(cache, d_h1, nullptr, true), n, n);
}

double ToyDenoiser::loss_and_gradient(std::span<const TrainingExample> batch, ToyParameters& grad) const {
  if (batch.empty()) throw Error(ErrorCode::kEmptyDataset, "empty training batch");
  const auto& p = params_;
  const int n = config_.image_size;
  double total = 0.0;
  const double scale = 1.0 / (static_cast<double>(batch.size()) * n * n * 3);
  Cache cache;
  for (const auto& ex : batch) {
    forward(*ex.x_t, ex.ts.alpha_bar, *ex.cond, cache, true);
    const Matrix target = ConstMap(ex.x0->storage().data(), cache.x0.rows(), 3);
    const Matrix diff = cache.x0 - target;
    total += diff.squaredNorm() * scale;
    const Matrix d_x0 = 2.0 * scale * diff;

    grad.head_w += cache.h2.transpose() * d_x0;
    grad.head_b += d_x0.colwise().sum();
    const Matrix d_z = (d_x0 * p.head_w.transpose()).cwiseProduct(cache.z.unaryExpr(&silu_grad));
    grad.conv2_w += cache.h1_cols.transpose() * d_z;
    grad.conv2_b += d_z.colwise().sum();
    const Matrix d_h1 = col2im(d_z * p.conv2_w.transpose(), n, n, config_.channels);
    backward_features(cache, d_h1, &grad, false);
  }
  return total;
}

void ToyDenoiser::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  detail::write_u32(out, kToyMagic);
  detail::write_u32(out, kToyVersion);
  for (int v : {config_.image_size, config_.channels, config_.attn_dim, config_.fusion_dim, config_.text_dim,
                config_.num_freqs, config_.time_freqs, config_.masked_attention ? 1 : 0}) {
    detail::write_u32(out, static_cast<std::uint32_t>(v));
  }
  detail::write_u64(out, config_.text_seed);
  const auto spans = params_.tensors();
  detail::write_u32(out, static_cast<std::uint32_t>(spans.size()));
  for (const auto& s : spans) {
    detail::write_u32(out, static_cast<std::uint32_t>(s.size()));
    for (double v : s) detail::write_f64(out, v);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

ToyDenoiser ToyDenoiser::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  if (detail::read_u32(in) != kToyMagic) throw Error(ErrorCode::kFormat, "'" + path.string() + "' is not a toy model");
  if (detail::read_u32(in) != kToyVersion) throw Error(ErrorCode::kFormat, "unsupported toy model version");
  ToyModelConfig cfg;
  for (int* v : {&cfg.image_size, &cfg.channels, &cfg.attn_dim, &cfg.fusion_dim, &cfg.text_dim, &cfg.num_freqs,
                 &cfg.time_freqs}) {
    *v = static_cast<int>(detail::read_u32(in));
  }
  cfg.masked_attention = detail::read_u32(in) != 0;
  cfg.text_seed = detail::read_u64(in);
  cfg.validate();
  ToyParameters params = ToyParameters::random(cfg, 0).zeros_like();
  auto spans = params.tensors();
  if (detail::read_u32(in) != spans.size()) throw Error(ErrorCode::kFormat, "toy model parameter count mismatch");
  for (auto& s : spans) {
    if (detail::read_u32(in) != s.size()) throw Error(ErrorCode::kFormat, "toy model parameter shape mismatch");
    for (double& v : s) v = detail::read_f64(in);
  }
  return ToyDenoiser(cfg, std::move(params));
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) throw Error(ErrorCode::kConfig, "epochs and batch_size must be >= 1");
  if (!(learning_rate > 0.0) || momentum < 0.0 || momentum >= 1.0) {
    throw Error(ErrorCode::kConfig, "learning_rate must be > 0 and momentum in [0, 1)");
  }
  if (caption_dropout < 0.0 || caption_dropout > 1.0 || uncond_dropout < 0.0 || uncond_dropout > 1.0) {
    throw Error(ErrorCode::kConfig, "dropout probabilities must be in [0, 1]");
  }
}

TrainResult train_toy_denoiser(std::span<const SyntheticSample> dataset, const NoiseSchedule& schedule,
                               const ToyModelConfig& model_config, const TrainConfig& tc, std::uint64_t seed,
                               const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "training needs at least one sample");
  tc.validate();
  std::mt19937_64 rng(seed);
  TrainResult result{ToyDenoiser::random(model_config, rng()), {}, {}};
  ToyDenoiser& model = result.model;
  const int n = model_config.image_size;

  // Conditioning variants are fixed per sample; encode them once.
  std::vector<Tensor> targets;
  std::vector<EncodedConditioning> with_caption, without_caption;
  for (const auto& s : dataset) {
    targets.push_back(to_model_range(s.image));
    Conditioning c = Conditioning::from_scene(s.scene);
    with_caption.push_back(model.encode(c));
    c.caption.clear();
    without_caption.push_back(model.encode(c));
  }
  Conditioning null_cond = Conditioning::null(n, n);
  const EncodedConditioning null_enc = model.encode(null_cond);

  ToyParameters velocity = model.parameters().zeros_like();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> t_dist(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<Tensor> noisy;
      noisy.reserve(end - start);
      std::vector<TrainingExample> batch;
      bool null_seen = false;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const int t = t_dist(rng);
        const double a = schedule.alpha_bar(t);
        Tensor xt(n, n, 3);
        const double sa = std::sqrt(a), s1a = std::sqrt(1.0 - a);
        for (std::size_t i = 0; i < xt.size(); ++i) xt[i] = sa * targets[idx][i] + s1a * normal(rng);
        noisy.push_back(std::move(xt));

        const EncodedConditioning* cond = &with_caption[idx];
        if (unit(rng) < tc.uncond_dropout) {
          cond = &null_enc;
          ++result.counters.null_condition_samples;
          ++result.counters.null_caption_samples;
          null_seen = true;
        } else if (unit(rng) < tc.caption_dropout) {
          cond = &without_caption[idx];
          ++result.counters.null_caption_samples;
          null_seen = true;
        }
        batch.push_back({nullptr, &targets[idx], Timestep{t, a}, cond});
      }
      for (std::size_t i = 0; i < batch.size(); ++i) batch[i].x_t = &noisy[i];

      ToyParameters grad = model.parameters().zeros_like();
      epoch_loss += model.loss_and_gradient(batch, grad);
      ++epoch_batches;
      ++result.counters.batches;
      result.counters.samples += static_cast<std::int64_t>(batch.size());
      if (null_seen) ++result.counters.batches_with_null_tokens;

      auto params = model.parameters().tensors();
      auto vel = velocity.tensors();
      const auto grads = grad.tensors();
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].size(); ++i) {
          vel[k][i] = tc.momentum * vel[k][i] + grads[k][i];
          params[k][i] -= tc.learning_rate * vel[k][i];
        }
      }
    }
    result.epoch_losses.push_back(epoch_loss / epoch_batches);
    if (on_epoch) on_epoch(epoch + 1, result.epoch_losses.back());
  }
  return result;
}

}  // namespace pathclip
