// Copyright 2026 The M3EL Authors.
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

namespace m3el {

// Error taxonomy. The CLI maps each family onto a stable exit code.

// Violated precondition on an internal API (shape mismatch, bad index).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor shape disagreement.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Invalid user configuration or hyperparameter.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bank file load failures, one type per failure kind.
class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};
class VersionMismatchError : public DataError {
 public:
  using DataError::DataError;
};
class TruncatedError : public DataError {
 public:
  using DataError::DataError;
};
class NonFiniteValueError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf produced during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m3el
