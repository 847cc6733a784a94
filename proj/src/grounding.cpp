// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/grounding.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binary_io.hpp"
#include "pathclip/error.hpp"

namespace pathclip {

namespace {

constexpr std::uint32_t kFusionMagic = detail::fourcc('P', 'C', 'F', 'N');
constexpr std::uint32_t kFusionVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

HashTextEncoder::HashTextEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "text encoder dimension must be positive");
}

Vector HashTextEncoder::token_row(const std::string& token) const {
  std::mt19937_64 rng(fnv1a(token) ^ seed_);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector row(dim_);
  for (int i = 0; i < dim_; ++i) row[i] = normal(rng);
  return row;
}

AppearanceEmbedding HashTextEncoder::encode(std::span<const std::string> tokens) const {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "no tokens to encode");
  AppearanceEmbedding out;
  out.values.resize(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t l = 0; l < tokens.size(); ++l) out.values.row(static_cast<Eigen::Index>(l)) = token_row(tokens[l]);
  return out;
}

std::vector<double> path_vector(const PathParams& path, int canvas_w, int canvas_h, std::size_t max_vertices) {
  if (canvas_w < 1 || canvas_h < 1) throw Error(ErrorCode::kInvalidArgument, "canvas must be positive");
  if (path.clip_points.empty() || path.clip_points.size() > max_vertices) {
    throw Error(ErrorCode::kVertexCountOutOfRange, "path has too many or no vertices to encode");
  }
  const double sx = 1.0 / canvas_w;
  const double sy = 1.0 / canvas_h;
  std::vector<double> tau = {path.box.cx * sx, path.box.cy * sy, path.box.w * sx, path.box.h * sy};
  for (std::size_t i = 0; i < max_vertices; ++i) {
    const Point& p = path.clip_points[std::min(i, path.clip_points.size() - 1)];
    tau.push_back(p.x * sx);
    tau.push_back(p.y * sy);
  }
  return tau;
}

PathEmbedding fourier_encode(std::span<const double> tau, int num_freqs) {
  if (tau.empty()) throw Error(ErrorCode::kEmptyInput, "Fourier encoding of an empty vector");
  if (num_freqs < 1) throw Error(ErrorCode::kInvalidArgument, "num_freqs must be >= 1");
  PathEmbedding out;
  out.values.resize(static_cast<Eigen::Index>(2 * num_freqs * tau.size()));
  Eigen::Index i = 0;
  for (double x : tau) {
    double freq = std::numbers::pi;
    for (int j = 0; j < num_freqs; ++j, freq *= 2.0) {
      out.values[i++] = std::sin(freq * x);
      out.values[i++] = std::cos(freq * x);
    }
  }
  return out;
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::kLinear: return x;
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kSilu: return x * sigmoid(x);
    case Activation::kTanh: return std::tanh(x);
  }
  return x;
}

double activate_derivative(Activation act, double x) {
  switch (act) {
    case Activation::kLinear: return 1.0;
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kSilu: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

FusionNetwork::FusionNetwork(Matrix w1, Vector b1, Matrix w2, Vector b2, Activation activation)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)), activation_(activation) {
  if (w1_.rows() != b1_.size() || w2_.cols() != w1_.rows() || w2_.rows() != b2_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "inconsistent fusion network weights");
  }
}

FusionNetwork FusionNetwork::random(int d_in, int d_b, std::uint64_t seed, Activation activation) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w1(d_b, d_in), w2(d_b, d_b);
  const double s1 = std::sqrt(2.0 / d_in);
  const double s2 = std::sqrt(1.0 / d_b);
  for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = normal(rng) * s1;
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = normal(rng) * s2;
  return FusionNetwork(std::move(w1), Vector::Zero(d_b), std::move(w2), Vector::Zero(d_b), activation);
}

FusionNetwork FusionNetwork::identity(int dim) {
  return FusionNetwork(Matrix::Identity(dim, dim), Vector::Zero(dim), Matrix::Identity(dim, dim), Vector::Zero(dim),
                       Activation::kLinear);
}

Matrix FusionNetwork::forward(const Matrix& input, Matrix& hidden_pre) const {
  if (input.cols() != w1_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "fusion network expects " + std::to_string(w1_.cols()) +
                                                   " inputs, got " + std::to_string(input.cols()));
  }
  hidden_pre = input * w1_.transpose();
  hidden_pre.rowwise() += b1_.transpose();
  Matrix hidden = hidden_pre.unaryExpr([this](double x) { return activate(activation_, x); });
  Matrix out = hidden * w2_.transpose();
  out.rowwise() += b2_.transpose();
  return out;
}

Matrix FusionNetwork::forward(const Matrix& input) const {
  Matrix hidden_pre;
  return forward(input, hidden_pre);
}

void FusionNetwork::write(std::ostream& out) const {
  detail::write_u32(out, kFusionMagic);
  detail::write_u32(out, kFusionVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(input_dim()));
  detail::write_u32(out, static_cast<std::uint32_t>(output_dim()));
  for (Eigen::Index i = 0; i < w1_.size(); ++i) detail::write_f32(out, w1_.data()[i]);
  for (Eigen::Index i = 0; i < b1_.size(); ++i) detail::write_f32(out, b1_[i]);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) detail::write_f32(out, w2_.data()[i]);
  for (Eigen::Index i = 0; i < b2_.size(); ++i) detail::write_f32(out, b2_[i]);
}

FusionNetwork FusionNetwork::read(std::istream& in, Activation activation) {
  if (detail::read_u32(in) != kFusionMagic) throw Error(ErrorCode::kFormat, "not a fusion network file");
  if (detail::read_u32(in) != kFusionVersion) throw Error(ErrorCode::kFormat, "unsupported fusion network version");
  const auto d_in = static_cast<Eigen::Index>(detail::read_u32(in));
  const auto d_b = static_cast<Eigen::Index>(detail::read_u32(in));
  if (d_in < 1 || d_b < 1 || d_in > (1 << 20) || d_b > (1 << 20)) {
    throw Error(ErrorCode::kFormat, "fusion network dimensions out of range");
  }
  Matrix w1(d_b, d_in), w2(d_b, d_b);
  Vector b1(d_b), b2(d_b);
  for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = detail::read_f32(in);
  for (Eigen::Index i = 0; i < b1.size(); ++i) b1[i] = detail::read_f32(in);
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = detail::read_f32(in);
  for (Eigen::Index i = 0; i < b2.size(); ++i) b2[i] = detail::read_f32(in);
  return FusionNetwork(std::move(w1), std::move(b1), std::move(w2), std::move(b2), activation);
}

void FusionNetwork::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  write(out);
}

FusionNetwork FusionNetwork::load(const std::filesystem::path& path, Activation activation) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return read(in, activation);
}

FusedEmbedding fuse_embeddings(const AppearanceEmbedding& e_theta, const PathEmbedding& e_tau,
                               const FusionNetwork& net) {
  const Eigen::Index rows = e_theta.values.rows();
  const Eigen::Index d_theta = e_theta.values.cols();
  const Eigen::Index d_tau = e_tau.values.size();
  if (d_theta + d_tau != net.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "fusion input is " + std::to_string(d_theta + d_tau) +
                                                   " wide but the network expects " +
                                                   std::to_string(net.input_dim()));
  }
  Matrix joined(rows, d_theta + d_tau);
  joined.leftCols(d_theta) = e_theta.values;
  joined.rightCols(d_tau) = e_tau.values.transpose().replicate(rows, 1);
  return FusedEmbedding{net.forward(joined)};
}

Matrix attention_weights(const Matrix& q, const Matrix& k) {
  if (q.cols() != k.cols() || q.cols() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "query and key widths differ");
  }
  if (k.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "attention over zero keys");
  Matrix logits = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double peak = row.maxCoeff();
    row = (row.array() - peak).exp();
    row /= row.sum();
  }
  return logits;
}

Matrix cross_attention(const AttentionInputs& inputs) {
  if (inputs.k.rows() != inputs.v.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "key and value counts differ");
  }
  return attention_weights(inputs.q, inputs.k) * inputs.v;
}

Matrix masked_cross_attention(const AttentionInputs& inputs, const PolygonMask& mask) {
  if (static_cast<std::size_t>(inputs.q.rows()) != mask.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "query count does not match the mask grid");
  }
  Matrix out = cross_attention(inputs);
  const auto cells = mask.cells();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (!cells[static_cast<std::size_t>(r)]) out.row(r).setZero();
  }
  return out;
}

Matrix compose_scene_attention(const Matrix& q, std::span<const GroundedTokens> primitives,
                               const FusedEmbedding& global_tokens, const AttentionProjection& projection) {
  const auto n = static_cast<std::size_t>(q.rows());
  std::vector<std::uint8_t> covered(n, 0);
  Matrix out = Matrix::Zero(q.rows(), projection.wv.cols());
  for (const auto& prim : primitives) {
    if (prim.mask.size() != n) throw Error(ErrorCode::kDimensionMismatch, "primitive mask does not match the grid");
    AttentionInputs in{q, prim.tokens.values * projection.wk, prim.tokens.values * projection.wv};
    out += masked_cross_attention(in, prim.mask);
    const auto cells = prim.mask.cells();
    for (std::size_t i = 0; i < n; ++i) covered[i] |= cells[i];
  }
  bool any_uncovered = false;
  for (auto c : covered) any_uncovered |= (c == 0);
  if (any_uncovered && global_tokens.values.rows() > 0) {
    AttentionInputs in{q, global_tokens.values * projection.wk, global_tokens.values * projection.wv};
    const Matrix global = cross_attention(in);
    for (std::size_t i = 0; i < n; ++i) {
      if (!covered[i]) out.row(static_cast<Eigen::Index>(i)) += global.row(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

}  // namespace pathclip
