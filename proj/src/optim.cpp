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

#include "equiswarm/optim.hpp"

#include <cmath>

#include "equiswarm/errors.hpp"
#include "equiswarm/kernels.hpp"

namespace equiswarm {

double global_grad_norm(const ParameterStore& params) {
  double sq = 0;
  for (const auto& p : params) {
    sq += kernels::dot(p->grad.data(), p->grad.data(), p->grad.size());
  }
  return std::sqrt(sq);
}

AdamStepStats Adam::step(ParameterStore& params) {
  for (const auto& p : params) {
    if (!p->grad.same_shape(p->value)) {
      throw ShapeError("adam: gradient of " + p->name + " has shape " + p->grad.shape_string() +
                       ", parameter " + p->value.shape_string());
    }
    if (!p->grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p->name);
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p->value.shape(), 0);
      v_.emplace_back(p->value.shape(), 0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter set changed between steps");

  AdamStepStats stats;
  stats.grad_norm = global_grad_norm(params);
  if (config_.max_grad_norm > 0 && stats.grad_norm > config_.max_grad_norm) {
    stats.clip_scale = config_.max_grad_norm / stats.grad_norm;
  }

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]) * stats.clip_scale;
      m[j] = static_cast<Scalar>(b1 * m[j] + (1 - b1) * g);
      v[j] = static_cast<Scalar>(b2 * v[j] + (1 - b2) * g * g);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.value[j] -= static_cast<Scalar>(config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
  return stats;
}

}  // namespace equiswarm
