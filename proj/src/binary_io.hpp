// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "pathclip/error.hpp"

namespace pathclip::detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline void write_f32(std::ostream& out, double value) {
  write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4) throw Error(ErrorCode::kFormat, "unexpected end of binary file");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline double read_f32(std::istream& in) { return static_cast<double>(std::bit_cast<float>(read_u32(in))); }

inline void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& in) {
  const std::uint64_t lo = read_u32(in);
  return lo | (static_cast<std::uint64_t>(read_u32(in)) << 32);
}

inline void write_f64(std::ostream& out, double value) { write_u64(out, std::bit_cast<std::uint64_t>(value)); }

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

constexpr std::uint32_t fourcc(char a, char b, char c, char d) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(a)) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(d)) << 24);
}

}  // namespace pathclip::detail
