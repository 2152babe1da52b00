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
// Reverse-mode automatic differentiation over dense rank-2 tensors.
//
// A Tape records every primitive executed on it together with the adjoint of
// that primitive. Tape::backward walks the record in exact reverse order and
// accumulates gradients into the Parameters that were bound to the tape.
// A tape is single-owner; run one tape per thread.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "equiswarm/tensor.hpp"

namespace equiswarm {

// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Ordered collection of parameters with stable addresses.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& get(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  // Copies values from `other`; names and shapes must match exactly.
  void copy_values_from(const ParameterStore& other);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binds a parameter; after backward its gradient is added to `p.grad`.
  Var param(Parameter& p);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);

  // Reverse pass from a (1,1) loss. A tape supports exactly one backward.
  void backward(const Var& loss);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Gradient buffer for node `id`, allocated as zeros on first use.
  Tensor& grad(int id);
  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  // Clears all nodes so the tape can be reused for a new forward pass.
  void reset();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  void check_open(const char* op) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Row-major 3x3 rotation used by the vector-channel primitive.
using Rot3 = std::array<Scalar, 9>;

namespace ops {

Var matmul(const Var& a, const Var& b);
// Elementwise; `b` may also be a (1,n) row or a (1,1) scalar broadcast over `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Scalar s);
Var add_scalar(const Var& a, Scalar s);
Var neg(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var minimum(const Var& a, const Var& b);
Var clip(const Var& a, Scalar lo, Scalar hi);
// Row-wise softmax. Entries whose mask byte is zero get probability 0; every
// row must keep at least one unmasked entry.
Var softmax_rows(const Var& a, std::shared_ptr<const std::vector<std::uint8_t>> mask = nullptr);
// (x - mean) / sqrt(var + eps) per row, without affine terms.
Var layer_norm_rows(const Var& a, Scalar eps);
// x / sqrt(mean(x^2) + eps) per row.
Var rms_norm_rows(const Var& a, Scalar eps);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, int begin, int count);
Var reshape(const Var& a, int rows, int cols);
// axis 0 -> (1, cols); axis 1 -> (rows, 1).
Var mean(const Var& a, int axis);
Var sum(const Var& a);
Var mean_all(const Var& a);
Var gather_rows(const Var& a, std::shared_ptr<const std::vector<int>> index);

// Applies per-row rotations to the vector channels of typed features laid out
// as [m0 scalars | m1 x-components | m1 y-components | m1 z-components].
// Scalars pass through. With `transpose`, each row uses R^T instead of R.
Var rotate_vector_channels(const Var& a, std::shared_ptr<const std::vector<Rot3>> rotations,
                           int m0, int m1, bool transpose);

// Attention logits: q is (R, H*d), k is (R*N, H*d). Output (R, H*N) with
// out[r, h*N+p] = scale * <q[r, h], k[r*N+p, h]>.
Var grouped_row_dot(const Var& q, const Var& k, int group, int heads, Scalar scale);
// Weighted sum: alpha is (R, H*N), v is (R*N, H*dv). Output (R, H*dv) with
// out[r, h] = sum_p alpha[r, h*N+p] * v[r*N+p, h].
Var grouped_weighted_sum(const Var& alpha, const Var& v, int group, int heads);

}  // namespace ops

// Dense affine layer y = x W + b with Xavier-uniform weights and zero bias.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out,
         std::mt19937_64& rng, bool bias = true, Scalar gain = 1.0);
  Var operator()(Tape& tape, const Var& x) const;
  int in() const { return in_; }
  int out() const { return out_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  int in_ = 0;
  int out_ = 0;
};

// Xavier/Glorot uniform: U(-a, a), a = gain * sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(int fan_in, int fan_out, std::mt19937_64& rng, Scalar gain = 1.0);

}  // namespace equiswarm
