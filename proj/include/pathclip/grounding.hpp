// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

// Grounding: path/appearance embeddings, their fusion, and standard and
// masked cross-attention.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathclip/geometry.hpp"

namespace pathclip {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct PathEmbedding {
  Vector values;  // 2 * num_freqs * len(tau), entries in [-1, 1]
};

struct AppearanceEmbedding {
  Matrix values;  // L x d_theta
};

struct FusedEmbedding {
  Matrix values;  // L x d_b
};

/// Token-sequence encoder. Implementations must be deterministic.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual int dim() const = 0;
  virtual AppearanceEmbedding encode(std::span<const std::string> tokens) const = 0;
};

/// Stand-in for a learned text encoder: each token maps to a fixed
/// pseudo-random unit-variance row keyed by FNV-1a of the token bytes.
class HashTextEncoder final : public TextEncoder {
 public:
  explicit HashTextEncoder(int dim = 64, std::uint64_t seed = 0x5EED);

  int dim() const override { return dim_; }
  AppearanceEmbedding encode(std::span<const std::string> tokens) const override;
  Vector token_row(const std::string& token) const;

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Token used in place of a dropped or absent global caption.
inline const std::string kNullToken = "<null>";

/// tau = [cx, cy, w, h, x1, y1, ..., xk, yk] with x / canvas_w and
/// y / canvas_h; the vertex list is padded to `max_vertices` by repeating
/// the last vertex so every primitive yields the same length.
std::vector<double> path_vector(const PathParams& path, int canvas_w, int canvas_h,
                                std::size_t max_vertices = kDefaultMaxVertices);

/// For each input x and j in [0, num_freqs): sin(2^j pi x), cos(2^j pi x).
PathEmbedding fourier_encode(std::span<const double> tau, int num_freqs);

enum class Activation { kLinear, kRelu, kSilu, kTanh };

double activate(Activation act, double x);
double activate_derivative(Activation act, double x);

/// Two-layer perceptron d_in -> d_b -> d_b.
class FusionNetwork {
 public:
  FusionNetwork() = default;
  FusionNetwork(Matrix w1, Vector b1, Matrix w2, Vector b2, Activation activation);

  static FusionNetwork random(int d_in, int d_b, std::uint64_t seed, Activation activation = Activation::kSilu);
  static FusionNetwork identity(int dim);

  int input_dim() const { return static_cast<int>(w1_.cols()); }
  int output_dim() const { return static_cast<int>(w2_.rows()); }
  Activation activation() const { return activation_; }

  /// Row-wise forward pass over an n x d_in input.
  Matrix forward(const Matrix& input) const;
  /// Same, keeping the hidden pre-activation for backpropagation.
  Matrix forward(const Matrix& input, Matrix& hidden_pre) const;

  Matrix& w1() { return w1_; }
  Vector& b1() { return b1_; }
  Matrix& w2() { return w2_; }
  Vector& b2() { return b2_; }
  const Matrix& w1() const { return w1_; }
  const Vector& b1() const { return b1_; }
  const Matrix& w2() const { return w2_; }
  const Vector& b2() const { return b2_; }

  /// 16-byte header (magic "PCFN", version, d_in, d_b; little-endian u32)
  /// followed by W1, b1, W2, b2 as little-endian float32, row-major.
  void write(std::ostream& out) const;
  static FusionNetwork read(std::istream& in, Activation activation = Activation::kSilu);
  void save(const std::filesystem::path& path) const;
  static FusionNetwork load(const std::filesystem::path& path, Activation activation = Activation::kSilu);

 private:
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
  Activation activation_ = Activation::kSilu;
};

/// Row l of the result is net([e_theta_l ; e_tau]).
FusedEmbedding fuse_embeddings(const AppearanceEmbedding& e_theta, const PathEmbedding& e_tau,
                               const FusionNetwork& net);

struct AttentionInputs {
  Matrix q;  // n_pix x d
  Matrix k;  // m x d
  Matrix v;  // m x d_v
};

/// Row-wise softmax(q k^T / sqrt(d)) with max subtraction.
Matrix attention_weights(const Matrix& q, const Matrix& k);

Matrix cross_attention(const AttentionInputs& inputs);

/// cross_attention with every row at a mask-0 position set to exactly zero.
Matrix masked_cross_attention(const AttentionInputs& inputs, const PolygonMask& mask);

/// Key/value projections applied to fused token rows.
struct AttentionProjection {
  Matrix wk;  // d_b x d
  Matrix wv;  // d_b x d_v
};

struct GroundedTokens {
  FusedEmbedding tokens;
  PolygonMask mask;
};

/// Sum of per-primitive masked cross-attention, plus cross-attention to the
/// global tokens at positions no primitive covers.
Matrix compose_scene_attention(const Matrix& q, std::span<const GroundedTokens> primitives,
                               const FusedEmbedding& global_tokens, const AttentionProjection& projection);

}  // namespace pathclip
