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

#include "equiswarm/quad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "equiswarm/errors.hpp"
#include "equiswarm/group.hpp"

namespace equiswarm {

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("[quad] mass must be positive");
  if (!(arm_length > 0.0)) throw ConfigError("[quad] arm_length must be positive");
  if (!(max_thrust > 0.0)) throw ConfigError("[quad] max_thrust must be positive");
  if (!(dt_phys > 0.0) || !(dt_ctrl > 0.0)) {
    throw ConfigError("[quad] dt_phys and dt_ctrl must be positive");
  }
  const double ratio = dt_ctrl / dt_phys;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("[quad] dt_ctrl must be an integer multiple of dt_phys");
  }
  if ((inertia - inertia.transpose()).norm() > 1e-15 * std::max(1.0, inertia.norm())) {
    throw ConfigError("[quad] inertia must be symmetric");
  }
  Eigen::LLT<Mat3> llt(inertia);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("[quad] inertia must be positive definite");
  }
}

int QuadParams::substeps() const { return static_cast<int>(std::lround(dt_ctrl / dt_phys)); }

QuadParams QuadParams::from_config(const Config& cfg) {
  QuadParams p;
  p.mass = cfg.get("quad", "mass", p.mass);
  p.arm_length = cfg.get("quad", "arm_length", p.arm_length);
  p.max_thrust = cfg.get("quad", "max_thrust", p.max_thrust);
  p.yaw_torque_coeff = cfg.get("quad", "yaw_torque_coeff", p.yaw_torque_coeff);
  p.dt_phys = cfg.get("quad", "dt_phys", p.dt_phys);
  p.dt_ctrl = cfg.get("quad", "dt_ctrl", p.dt_ctrl);
  p.inertia(0, 0) = cfg.get("quad", "inertia_xx", p.inertia(0, 0));
  p.inertia(1, 1) = cfg.get("quad", "inertia_yy", p.inertia(1, 1));
  p.inertia(2, 2) = cfg.get("quad", "inertia_zz", p.inertia(2, 2));
  p.validate();
  return p;
}

std::vector<ConfigKey> QuadParams::config_keys() {
  std::vector<ConfigKey> keys;
  for (const char* k : {"mass", "arm_length", "max_thrust", "yaw_torque_coeff", "dt_phys",
                        "dt_ctrl", "inertia_xx", "inertia_yy", "inertia_zz"}) {
    keys.push_back({"quad", k});
  }
  return keys;
}

Vec4 normalize_action(const Vec4& u) {
  Vec4 a;
  for (int k = 0; k < 4; ++k) {
    if (std::isnan(u[k])) throw NumericError("normalize_action: NaN in raw action");
    a[k] = 0.5 * (1.0 + std::clamp(u[k], -1.0, 1.0));
  }
  return a;
}

Vec4 motor_thrusts(const Vec4& a, const QuadParams& p) { return a * p.max_thrust; }

Vec3 mixer_torque(const Vec4& t, const QuadParams& p) {
  const double d = p.arm_length / std::sqrt(2.0);
  // tau = sum r_k x (0, 0, T_k) + yaw drag.
  return {d * (-t[0] - t[1] + t[2] + t[3]),
          d * (-t[0] + t[1] + t[2] - t[3]),
          p.yaw_torque_coeff * (-t[0] + t[1] - t[2] + t[3])};
}

StateDerivative derivative(const QuadState& s, const Vec4& a, const QuadParams& p,
                           const AeroHook& hook) {
  const Vec4 thrusts = motor_thrusts(a, p);
  Wrench extra;
  if (hook) extra = hook(s, a);
  const Vec3 thrust_body(0.0, 0.0, thrusts.sum());
  const Vec3 torque = mixer_torque(thrusts, p) + extra.torque;
  const Vec3& w = s.body_rate;

  StateDerivative d;
  d.position = s.velocity;
  d.velocity = Vec3(0.0, 0.0, -kGravity) + (s.attitude * thrust_body + extra.force) / p.mass;
  d.body_rate = p.inertia.ldlt().solve(torque - w.cross(p.inertia * w));
  d.attitude = skew(s.attitude * w) * s.attitude;
  return d;
}

QuadState step(const QuadState& s, const Vec4& a, const QuadParams& p, const AeroHook& hook) {
  const double h = p.dt_phys;
  QuadState x = s;
  for (int i = 0, n = p.substeps(); i < n; ++i) {
    const StateDerivative d = derivative(x, a, p, hook);
    const Vec3 v_old = x.velocity;
    x.velocity += h * d.velocity;
    // Gyroscopic term taken at the new rate: (J - h [J w]x) w' = J w + h tau.
    // Without torque this never increases the rotational energy.
    const Vec3 jw = p.inertia * x.body_rate;
    const Vec3 torque = p.inertia * d.body_rate + x.body_rate.cross(jw);
    x.body_rate = (p.inertia - h * skew(jw)).partialPivLu().solve(jw + h * torque);
    x.position += 0.5 * h * (v_old + x.velocity);
    x.attitude = orthonormalize(x.attitude + h * skew(x.attitude * x.body_rate) * x.attitude);
    if (!x.finite()) {
      throw DivergenceError("quadrotor state became non-finite during integration");
    }
  }
  return x;
}

}  // namespace equiswarm
