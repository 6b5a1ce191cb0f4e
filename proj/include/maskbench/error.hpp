// Copyright 2026 The maskbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace maskbench {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kDegeneratePolygon,
  kCorruptMaskFile,
  kManifestParseError,
  kMissingImage,
  kUnknownImage,
  kInvariantViolation,
  kStorageError,
  kLockHeld,
  kEmptyTruth,
  kDuplicateResult,
  kDecodeError,
  kAddressInUse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::kCorruptMaskFile: return "CorruptMaskFile";
    case ErrorCode::kManifestParseError: return "ManifestParseError";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kUnknownImage: return "UnknownImage";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kStorageError: return "StorageError";
    case ErrorCode::kLockHeld: return "LockHeld";
    case ErrorCode::kEmptyTruth: return "EmptyTruth";
    case ErrorCode::kDuplicateResult: return "DuplicateResult";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kAddressInUse: return "AddressInUse";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maskbench
