/* Copyright 2026 The SGPose Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace sgpose {

// Exit codes shared by the command-line tool.
enum class ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode code() const { return ExitCode::kInternal; }
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kUsage; }
};

// Invalid hyperparameter or configuration mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kUsage; }
};

// API called in a state where it is not allowed.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kUsage; }
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode code() const override { return ExitCode::kData; }
};

}  // namespace sgpose
