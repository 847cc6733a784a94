// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace pathclip {

// Numeric values are shared with the C API (pc_status in pathclip.h).
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kMissingField = 2,
  kMalformedNumber = 3,
  kVertexCountOutOfRange = 4,
  kUnbalancedBrackets = 5,
  kUnexpectedToken = 6,
  kDegeneratePolygon = 7,
  kDimensionMismatch = 8,
  kEmptyMask = 9,
  kLengthMismatch = 10,
  kEmptyExemplars = 11,
  kInvalidExemplar = 12,
  kNoPrimitivesFound = 13,
  kBackendFailure = 14,
  kFixtureNotFound = 15,
  kStepOrderViolation = 16,
  kNonPositiveVariance = 17,
  kEmptyDataset = 18,
  kShapeMismatch = 19,
  kRankTooLarge = 20,
  kNonFiniteEnergy = 21,
  kUnknownPaletteToken = 22,
  kIo = 23,
  kFormat = 24,
  kConfig = 25,
  kInvalidSchedule = 26,
  kEmptyInput = 27,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

  // Byte offset into parsed text, when the error came from a parser.
  std::optional<std::size_t> offset() const { return offset_; }
  // Element index (block, mask, primitive) the error refers to, if any.
  std::optional<std::size_t> index() const { return index_; }

  Error& at_offset(std::size_t offset);
  Error& at_index(std::size_t index);

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
  std::optional<std::size_t> index_;
};

}  // namespace pathclip
