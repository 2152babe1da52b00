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
// Rigid-body quadrotor in an X configuration with thrust-level inputs.

#include <functional>
#include <vector>

#include "equiswarm/config.hpp"
#include "equiswarm/state.hpp"

namespace equiswarm {

inline constexpr double kGravity = 9.81;

struct QuadParams {
  double mass = 0.027;
  Mat3 inertia = Vec3(1.4e-5, 1.4e-5, 2.17e-5).asDiagonal();
  double arm_length = 0.046;       // hub to motor
  double max_thrust = 0.15;        // per motor, N
  double yaw_torque_coeff = 0.006; // drag torque per unit thrust, m
  double dt_phys = 0.005;
  double dt_ctrl = 0.01;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  int substeps() const;
  // Normalized per-motor command that exactly balances gravity.
  double hover_action() const { return mass * kGravity / (4.0 * max_thrust); }

  // Reads section [quad]; missing keys keep the defaults above.
  static QuadParams from_config(const Config& cfg);
  static std::vector<ConfigKey> config_keys();
};

// External force (world frame) and torque (body frame) added to the rigid body.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};
using AeroHook = std::function<Wrench(const QuadState&, const Vec4& action)>;

struct StateDerivative {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Zero();
  Vec3 body_rate = Vec3::Zero();
};

// (1 + clip(u, -1, 1)) / 2 per element. Throws NumericError on NaN.
Vec4 normalize_action(const Vec4& u);

// Motor thrusts in newtons for normalized commands.
Vec4 motor_thrusts(const Vec4& a, const QuadParams& p);
// Body-frame torque of the X mixer. Motors sit at (+d,-d), (-d,-d), (-d,+d),
// (+d,+d) with d = arm / sqrt(2); spin signs are (-1, +1, -1, +1).
Vec3 mixer_torque(const Vec4& thrusts, const QuadParams& p);

StateDerivative derivative(const QuadState& s, const Vec4& a, const QuadParams& p,
                           const AeroHook& hook = nullptr);

// Advances dt_ctrl with the action held over dt_phys substeps. Each substep
// updates the rate (gyroscopic term linearly implicit) and velocity first, then
// the attitude from the new rate and the position from the mean of old and new
// velocity, then re-orthonormalizes.
// Throws DivergenceError if the state becomes non-finite.
QuadState step(const QuadState& s, const Vec4& a, const QuadParams& p,
               const AeroHook& hook = nullptr);

}  // namespace equiswarm
