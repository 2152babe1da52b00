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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "equiswarm/scalar.hpp"

namespace equiswarm {

// Dense row-major tensor. Network operations work on rank-2 tensors; a row
// vector is (1, n) and a scalar is (1, 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Scalar fill = 0);
  Tensor(std::vector<int> shape, std::vector<Scalar> data);

  static Tensor matrix(int rows, int cols, Scalar fill = 0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor scalar(Scalar v) { return Tensor({1, 1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int rows() const { return rank() == 2 ? shape_[0] : 1; }
  int cols() const { return rank() == 2 ? shape_[1] : static_cast<int>(size()); }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }
  std::vector<Scalar>& storage() { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& at(int r, int c) {
    return data_[static_cast<std::size_t>(r) * cols() + c];
  }
  Scalar at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols() + c];
  }
  Scalar item() const;

  void fill(Scalar v);
  void reshape(std::vector<int> shape);
  bool all_finite() const;

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace equiswarm
