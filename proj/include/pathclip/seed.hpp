// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace pathclip {

/// SplitMix64-style derivation of independent sub-seeds from (seed, a, b).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pathclip
