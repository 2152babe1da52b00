// Copyright 2026 The EquiSwarm Authors.
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

namespace equiswarm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes; the message names the operation and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Misuse of a Tape (non-scalar loss, second backward, foreign variables).
class TapeError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Invalid or missing configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace equiswarm
