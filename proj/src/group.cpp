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

#include "equiswarm/group.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace equiswarm {

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

Mat3 orthonormalize(const Mat3& r) {
  Vec3 c0 = r.col(0).normalized();
  Vec3 c1 = r.col(1) - c0.dot(r.col(1)) * c0;
  c1.normalize();
  Vec3 c2 = c0.cross(c1);
  Mat3 out;
  out << c0, c1, c2;
  return out;
}

Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  const Mat3 kx = skew(k);
  return Mat3::Identity() + std::sin(angle) * kx + (1 - std::cos(angle)) * kx * kx;
}

GroupElement GroupElement::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

std::array<double, 12> GroupElement::serialize() const {
  std::array<double, 12> out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = rotation_(i, j);
  }
  for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(9 + i)] = translation_(i);
  return out;
}

GroupElement GroupElement::deserialize(const std::array<double, 12>& v) {
  Mat3 r;
  r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return {r, Vec3(v[9], v[10], v[11])};
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  Mat3 r = a.rotation() * b.rotation();
  if (orthonormality_error(r) > kOrthonormalityTolerance) r = orthonormalize(r);
  return {r, a.rotation() * b.translation() + a.translation()};
}

double distance(const GroupElement& a, const GroupElement& b) {
  return std::max((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(),
                  (a.translation() - b.translation()).cwiseAbs().maxCoeff());
}

QuadState act_on_state(const GroupElement& g, const QuadState& s) {
  QuadState out = s;
  out.position = g.act_point(s.position);
  out.target = g.act_point(s.target);
  out.velocity = g.act_vector(s.velocity);
  out.attitude = g.rotation() * s.attitude;
  return out;
}

TensorialFeature act_on_feature(const GroupElement& g, const TensorialFeature& f) {
  TensorialFeature out = f;
  for (std::size_t c = 0; c < f.vectors.size(); ++c) {
    const bool pos = c < f.positional.size() && f.positional[c];
    out.vectors[c] = pos ? g.act_point(f.vectors[c]) : g.act_vector(f.vectors[c]);
  }
  out.frame = compose(g, f.frame);
  return out;
}

double feature_distance(const TensorialFeature& a, const TensorialFeature& b) {
  double d = distance(a.frame, b.frame);
  if (a.scalars.size() != b.scalars.size() || a.vectors.size() != b.vectors.size()) {
    return std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < a.scalars.size(); ++i) {
    d = std::max(d, std::abs(a.scalars[i] - b.scalars[i]));
  }
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    d = std::max(d, (a.vectors[i] - b.vectors[i]).cwiseAbs().maxCoeff());
  }
  return d;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 axis(normal(rng), normal(rng), normal(rng));
  while (axis.norm() < 1e-12) axis = Vec3(normal(rng), normal(rng), normal(rng));
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  return axis_angle(axis, angle(rng));
}

GroupElement random_se3(std::mt19937_64& rng, double half_extent) {
  const Mat3 r = random_rotation(rng);
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  return {r, Vec3(u(rng), u(rng), u(rng))};
}

}  // namespace equiswarm
