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
// Shared helpers for the test binaries: finite-difference gradient checks and
// random data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <type_traits>

#include "equiswarm/autodiff.hpp"

namespace equiswarm::test {

inline constexpr bool kDouble = std::is_same_v<Scalar, double>;
// Agreement expected between central differences and the reverse pass.
inline constexpr double kGradTol = kDouble ? 1e-6 : 5e-2;
inline constexpr double kFdStep = kDouble ? 1e-6 : 1e-2;

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(u(rng));
  return t;
}

using LossFn = std::function<Var(Tape&)>;

inline double loss_value(const LossFn& fn) {
  Tape tape;
  return static_cast<double>(fn(tape).value().item());
}

// Max over every parameter element of |analytic - numeric| / max(1, |numeric|).
inline double gradient_error(ParameterStore& params, const LossFn& fn, double h = kFdStep) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(fn(tape));
  }
  double worst = 0.0;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = static_cast<Scalar>(keep + h);
      const double up = loss_value(fn);
      p->value[i] = static_cast<Scalar>(keep - h);
      const double down = loss_value(fn);
      p->value[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(p->grad[i]);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

// Weighted sum with fixed pseudo-random weights so every output element
// contributes a distinct coefficient to the loss.
inline Var probe_loss(Tape& tape, const Var& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(y.value().shape(), rng);
  return ops::sum(ops::mul(y, tape.constant(w)));
}

}  // namespace equiswarm::test
