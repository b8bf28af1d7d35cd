// Copyright 2026 The UR2M Authors. All Rights Reserved.
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

namespace ur2m {

// Base of every error thrown by the library. `code()` is a stable,
// machine-parseable identifier used by the CLI's error line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* code() const noexcept { return "error"; }
};

#define UR2M_DEFINE_ERROR(Name, Base, Code)                       \
  class Name : public Base {                                      \
   public:                                                        \
    explicit Name(const std::string& what) : Base(what) {}        \
    const char* code() const noexcept override { return Code; }   \
  }

UR2M_DEFINE_ERROR(DimensionError, Error, "dimension");
UR2M_DEFINE_ERROR(ConfigError, Error, "config");
UR2M_DEFINE_ERROR(DomainError, Error, "domain");
UR2M_DEFINE_ERROR(InvariantError, Error, "invariant");
UR2M_DEFINE_ERROR(DataError, Error, "data");
UR2M_DEFINE_ERROR(TrainingError, Error, "training");
UR2M_DEFINE_ERROR(IoError, Error, "io");

// Model file errors.
UR2M_DEFINE_ERROR(FormatError, Error, "format");
UR2M_DEFINE_ERROR(VersionMismatchError, FormatError, "format.version");
UR2M_DEFINE_ERROR(TruncatedFileError, FormatError, "format.truncated");
UR2M_DEFINE_ERROR(InconsistentHeaderError, FormatError, "format.inconsistent");
UR2M_DEFINE_ERROR(ModelMismatchError, Error, "model_mismatch");

#undef UR2M_DEFINE_ERROR

}  // namespace ur2m
