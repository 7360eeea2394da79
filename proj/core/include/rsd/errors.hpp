// Copyright 2026 The RSD Authors.
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

namespace rsd {

// Base of every error thrown by the library. The CLI maps ValidationError
// and its subclasses to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input that is well-formed but violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input text that could not be parsed at all.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A metric whose value is undefined for the given input (e.g. zero-norm
// ground truth, no matched pairs).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Inconsistent inputs between pipeline stages; indicates a caller bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure from one pipeline stage with the stage name prefixed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool validation)
      : Error("[" + stage + "] " + what),
        stage_(std::move(stage)),
        validation_(validation) {}

  const std::string& stage() const { return stage_; }
  bool is_validation() const { return validation_; }

 private:
  std::string stage_;
  bool validation_;
};

}  // namespace rsd
