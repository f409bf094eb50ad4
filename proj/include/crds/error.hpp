// Copyright 2026 The CRDS Authors.
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

namespace crds {

// Error categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kState,
  kFormat,
  kLength,
  kVersion,
  kCoverage,
  kIo,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CRDS_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

CRDS_DEFINE_ERROR(InvalidArgument, kInvalidArgument)
CRDS_DEFINE_ERROR(StateError, kState)
CRDS_DEFINE_ERROR(FormatError, kFormat)
CRDS_DEFINE_ERROR(LengthError, kLength)
CRDS_DEFINE_ERROR(VersionError, kVersion)
CRDS_DEFINE_ERROR(CoverageError, kCoverage)
CRDS_DEFINE_ERROR(IoError, kIo)
CRDS_DEFINE_ERROR(NumericError, kNumeric)

#undef CRDS_DEFINE_ERROR

/// Exit code contract of the command-line driver:
/// 1 validation, 2 I/O or file format, 3 numeric.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kState:
      return 1;
    case ErrorKind::kFormat:
    case ErrorKind::kLength:
    case ErrorKind::kVersion:
    case ErrorKind::kCoverage:
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
  }
  return 1;
}

}  // namespace crds
