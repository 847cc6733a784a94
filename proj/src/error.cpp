// Copyright (C) 2026 The pathclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "pathclip/error.hpp"

namespace pathclip {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kMalformedNumber: return "MalformedNumber";
    case ErrorCode::kVertexCountOutOfRange: return "VertexCountOutOfRange";
    case ErrorCode::kUnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::kUnexpectedToken: return "UnexpectedToken";
    case ErrorCode::kDegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyExemplars: return "EmptyExemplars";
    case ErrorCode::kInvalidExemplar: return "InvalidExemplar";
    case ErrorCode::kNoPrimitivesFound: return "NoPrimitivesFound";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kFixtureNotFound: return "FixtureNotFound";
    case ErrorCode::kStepOrderViolation: return "StepOrderViolation";
    case ErrorCode::kNonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kRankTooLarge: return "RankTooLarge";
    case ErrorCode::kNonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorCode::kUnknownPaletteToken: return "UnknownPaletteToken";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kInvalidSchedule: return "InvalidSchedule";
    case ErrorCode::kEmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

Error& Error::at_offset(std::size_t offset) {
  offset_ = offset;
  return *this;
}

Error& Error::at_index(std::size_t index) {
  index_ = index;
  return *this;
}

}  // namespace pathclip
