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
// SE(3) elements, their actions on quadrotor states and typed features, and
// the canonicalization construction F(g, x) = psi_g[body(phi_{g^-1}[x])].

#include <array>
#include <functional>
#include <random>
#include <vector>

#include "equiswarm/state.hpp"

namespace equiswarm {

// Frobenius norm of R^T R - I.
double orthonormality_error(const Mat3& r);
// Gram-Schmidt on the columns; result has det +1.
Mat3 orthonormalize(const Mat3& r);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
Mat3 axis_angle(const Vec3& axis, double angle);
Mat3 skew(const Vec3& v);

// Drift beyond which compose() re-orthonormalizes the product rotation.
inline constexpr double kOrthonormalityTolerance = 1e-9;

class GroupElement {
 public:
  GroupElement() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  GroupElement(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static GroupElement identity() { return {}; }
  static GroupElement from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  static GroupElement from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  // Pose of a quadrotor: (attitude, position).
  static GroupElement pose_of(const QuadState& s) { return {s.attitude, s.position}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  GroupElement inverse() const;
  Vec3 act_point(const Vec3& x) const { return rotation_ * x + translation_; }
  Vec3 act_vector(const Vec3& v) const { return rotation_ * v; }

  // Row-major rotation followed by translation.
  std::array<double, 12> serialize() const;
  static GroupElement deserialize(const std::array<double, 12>& values);

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// (R_a R_b, R_a t_b + t_a).
GroupElement compose(const GroupElement& a, const GroupElement& b);
inline GroupElement inverse(const GroupElement& g) { return g.inverse(); }
inline GroupElement operator*(const GroupElement& a, const GroupElement& b) {
  return compose(a, b);
}

// Max elementwise distance between the two elements' matrices and vectors.
double distance(const GroupElement& a, const GroupElement& b);

// State action: positions and targets move affinely, velocity and world-frame
// angular velocity rotate, attitude is left-multiplied. The body-frame rate is
// unchanged because R_g R (body rate) = R_g (world rate).
QuadState act_on_state(const GroupElement& g, const QuadState& s);

// Typed feature: type-0 scalars and type-1 3-vectors expressed in `frame`.
// Positional vector channels transform affinely, the others linearly.
struct TensorialFeature {
  std::vector<double> scalars;
  std::vector<Vec3> vectors;
  std::vector<bool> positional;  // one flag per vector channel
  GroupElement frame;

  void add_vector(const Vec3& v, bool is_positional = false) {
    vectors.push_back(v);
    positional.push_back(is_positional);
  }
};

TensorialFeature act_on_feature(const GroupElement& g, const TensorialFeature& f);

// Max difference over scalars, vector channels and frame.
double feature_distance(const TensorialFeature& a, const TensorialFeature& b);

enum class ActionKind { kState, kFeature, kOutput };

// A group element bound to the space it acts on.
struct GroupAction {
  ActionKind kind;
  GroupElement element;

  QuadState apply(const QuadState& s) const { return act_on_state(element, s); }
  TensorialFeature apply(const TensorialFeature& f) const { return act_on_feature(element, f); }
};

// Lifts an unconstrained map `body: X -> Y` to F: G x X -> Y with
//   F(g, x) = out_action(g, body(in_action(g^-1, x))),
// which satisfies F(q g, in_action(q, x)) = out_action(q, F(g, x)).
template <typename T>
using Action = std::function<T(const GroupElement&, const T&)>;

template <typename X, typename Y, typename Body>
std::function<Y(const GroupElement&, const X&)> canonicalize(Body body, Action<X> in_action,
                                                             Action<Y> out_action) {
  return [body = std::move(body), in_action = std::move(in_action),
          out_action = std::move(out_action)](const GroupElement& g, const X& x) -> Y {
    return out_action(g, body(in_action(g.inverse(), x)));
  };
}

// Uniform random axis (on the sphere) with angle uniform on [0, pi].
Mat3 random_rotation(std::mt19937_64& rng);
// Random rotation plus translation uniform in [-half_extent, half_extent]^3.
GroupElement random_se3(std::mt19937_64& rng, double half_extent = 5.0);

}  // namespace equiswarm
