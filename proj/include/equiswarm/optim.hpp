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

#include <vector>

#include "equiswarm/autodiff.hpp"

namespace equiswarm {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.995;
  double eps = 2e-6;
  // Global L2 norm the gradients are clipped to before the moment update;
  // a non-positive value disables clipping.
  double max_grad_norm = 5.0;
};

struct AdamStepStats {
  double grad_norm = 0;   // before clipping
  double clip_scale = 1;  // factor applied to every gradient
};

double global_grad_norm(const ParameterStore& params);

// Adam with bias correction. Moments are created lazily on the first step and
// are tied to the parameter order of the store.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update from the gradients currently held in `params`.
  // Throws NumericError naming the first parameter with a non-finite
  // gradient; in that case nothing is modified.
  AdamStepStats step(ParameterStore& params);

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long t_ = 0;
};

}  // namespace equiswarm
