// Copyright 2026 The simulst Authors
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

namespace simulst {

// Status codes shared by the C API and the CLI exit status.
enum class ErrorCode : int {
  ok = 0,
  internal = 1,
  usage = 2,
  io = 3,
  numeric = 4,
  checkpoint = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorCode::internal, "dimension error: " + what) {}
};

// Token id or row index outside the valid range.
class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what)
      : Error(ErrorCode::internal, "index error: " + what) {}
};

// Caller broke an operation precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorCode::internal, "contract violation: " + what) {}
};

// Streaming cache used out of order.
class StateError : public Error {
 public:
  explicit StateError(const std::string& what)
      : Error(ErrorCode::internal, "state error: " + what) {}
};

// g(t) outside [1, n].
class ScheduleError : public Error {
 public:
  explicit ScheduleError(const std::string& what)
      : Error(ErrorCode::internal, "schedule error: " + what) {}
};

class LengthError : public Error {
 public:
  explicit LengthError(const std::string& what)
      : Error(ErrorCode::internal, "length error: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCode::usage, "config error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(ErrorCode::io, "i/o error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCode::numeric, "numeric failure: " + what) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what)
      : Error(ErrorCode::checkpoint, "checkpoint error: " + what) {}
};

}  // namespace simulst
