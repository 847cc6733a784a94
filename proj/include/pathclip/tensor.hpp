// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pathclip/error.hpp"

namespace pathclip {

/// Dense height x width x channels grid of doubles, channel-contiguous
/// (position-major). Used for images, noise, and feature maps alike.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    if (height < 1 || width < 1 || channels < 1) {
      throw Error(ErrorCode::kInvalidArgument, "tensor dimensions must be positive");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  int positions() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  bool same_shape(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  double& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Channel vector at flat position p = y * width + x.
  std::span<double> at(int p) {
    return {data_.data() + static_cast<std::size_t>(p) * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<const double> at(int p) const {
    return {data_.data() + static_cast<std::size_t>(p) * channels_, static_cast<std::size_t>(channels_)};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kShapeMismatch, what);
}

}  // namespace pathclip
