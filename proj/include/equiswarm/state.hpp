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

#include <Eigen/Dense>

namespace equiswarm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;

// One quadrotor in the world frame.
struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();       // body -> world
  Vec3 body_rate = Vec3::Zero();          // body-frame angular velocity
  Vec3 target = Vec3::Zero();

  Vec3 world_rate() const { return attitude * body_rate; }
  bool finite() const {
    return position.allFinite() && velocity.allFinite() && attitude.allFinite() &&
           body_rate.allFinite() && target.allFinite();
  }
};

}  // namespace equiswarm
