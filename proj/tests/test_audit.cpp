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

#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "equiswarm/errors.hpp"
#include "fixtures.hpp"

using namespace equiswarm;
using namespace equiswarm::test;

namespace {

const double kGravityResidual = 9.81 * std::numbers::sqrt2;

// x' = u on R^3 with rotations acting on both state and input.
DynamicsAuditProblem<Vec3, Vec3, Vec3> velocity_control() {
  DynamicsAuditProblem<Vec3, Vec3, Vec3> p;
  p.f = [](const Vec3&, const Vec3& u) { return u; };
  p.phi = [](const GroupElement& g, const Vec3& x) { return g.act_point(x); };
  p.psi = [](const GroupElement& g, const Vec3& u) { return g.act_vector(u); };
  p.dphi = [](const GroupElement& g, const Vec3&, const Vec3& d) { return g.act_vector(d); };
  p.distance = [](const Vec3& a, const Vec3& b) { return (a - b).norm(); };
  p.sample = [](std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return std::make_pair(Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng)));
  };
  return p;
}

}  // namespace

TEST_CASE("group samplers") {
  std::mt19937_64 rng(1);
  for (const char* name : {"se3", "so3", "se2z", "trans", "identity"}) {
    const NamedSampler s = make_group_sampler(name, 2.0);
    CHECK(s.name == name);
    CHECK_FALSE(s.description.empty());
    for (int i = 0; i < 50; ++i) {
      const GroupElement g = s.sample(rng);
      const Mat3& r = g.rotation();
      CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
      CHECK(r.determinant() == doctest::Approx(1.0));
      CHECK(g.translation().cwiseAbs().maxCoeff() <= 2.0);
      if (std::string(name) == "so3") CHECK(g.translation().norm() == 0.0);
      if (std::string(name) == "trans") CHECK(r == Mat3::Identity());
      if (std::string(name) == "identity") CHECK(distance(g, GroupElement::identity()) == 0.0);
      if (std::string(name) == "se2z") CHECK((r * Vec3::UnitZ() - Vec3::UnitZ()).norm() < 1e-15);
    }
  }
  CHECK_THROWS_AS(make_group_sampler("so2"), ConfigError);
}

TEST_CASE("swarm reward passes under every group") {
  const EnvConfig env;
  for (const char* name : {"se3", "so3", "se2z", "trans"}) {
    const auto r = audit_reward(swarm_reward_fn(env), make_group_sampler(name).sample, 4, 100,
                                1e-9, 3);
    CHECK(r.evaluated);
    CHECK(r.samples == 100);
    CHECK(r.residual <= 1e-9);
    CHECK(r.pass);
  }
}

TEST_CASE("a coordinate-dependent reward fails by the translation it sees") {
  const SwarmRewardFn x_reward = [](const SwarmState& s, const std::vector<Vec4>&) {
    std::vector<double> r;
    for (const auto& q : s.agents) r.push_back(q.position.x());
    return r;
  };
  const GroupSampler shift = [](std::mt19937_64&) {
    return GroupElement::from_translation(Vec3(3.0, -1.0, 2.0));
  };
  const auto r = audit_reward(x_reward, shift, 2, 20, 1e-9, 4);
  CHECK(r.residual == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(r.pass);
  const auto id = audit_reward(x_reward, make_group_sampler("identity").sample, 2, 20, 1e-9, 4);
  CHECK(id.residual == 0.0);
  CHECK(id.pass);
}

TEST_CASE("quadrotor dynamics: planar rotations pass, tilts expose gravity") {
  const QuadParams p;
  const auto prob = quad_dynamics_problem(p);
  const auto planar = audit_dynamics(prob, make_group_sampler("se2z").sample, 200, 1e-9, 5);
  CHECK(planar.residual <= 1e-9);
  CHECK(planar.pass);
  const auto full = audit_dynamics(prob, make_group_sampler("se3").sample, 200, 1e-9, 5);
  CHECK_FALSE(full.pass);
  // The gravity mismatch is bounded by 2 g; rates and thrust terms commute.
  CHECK(full.residual <= 2.0 * 9.81 + 1e-9);
  CHECK(full.residual > 1.0);
  CHECK(quad_rotation_probe(p) == doctest::Approx(kGravityResidual).epsilon(1e-9));
}

TEST_CASE("the only non-commuting term is gravity") {
  std::mt19937_64 rng(6);
  const QuadParams p;
  const auto prob = quad_dynamics_problem(p);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const QuadState x = random_quad_state(rng);
    const Vec4 a(u(rng), u(rng), u(rng), u(rng));
    const GroupElement g = random_se3(rng);
    // R_g (-g e3) versus -g e3.
    const double oracle = kGravity * (g.rotation() * Vec3::UnitZ() - Vec3::UnitZ()).norm();
    CHECK(dynamics_residual(prob, g, x, a) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("velocity control is equivariant") {
  const auto r = audit_dynamics(velocity_control(), make_group_sampler("se3").sample, 100, 1e-12, 7);
  CHECK(r.residual <= 1e-12);
  CHECK(r.pass);
}

TEST_CASE("differential action rotates each derivative component") {
  std::mt19937_64 rng(8);
  const QuadParams p;
  const auto prob = quad_dynamics_problem(p);
  for (int trial = 0; trial < 20; ++trial) {
    const QuadState x = random_quad_state(rng);
    const GroupElement g = random_se3(rng);
    const StateDerivative d = prob.f(x, Vec4::Constant(0.1));
    const StateDerivative pushed = differential_action(g, d);
    // Position and velocity components rotate like vectors.
    CHECK((pushed.velocity - g.act_vector(d.velocity)).norm() < 1e-12);
    CHECK((pushed.position - g.act_vector(d.position)).norm() < 1e-12);
    CHECK((pushed.attitude - g.rotation() * d.attitude).norm() < 1e-12);
    CHECK(derivative_distance(pushed, pushed) == 0.0);
  }
}

TEST_CASE("audits are deterministic and monotone in the sample count") {
  const auto prob = quad_dynamics_problem(QuadParams{});
  const auto sampler = make_group_sampler("so3").sample;
  const auto a = audit_dynamics(prob, sampler, 50, 1e-9, 9);
  const auto b = audit_dynamics(prob, sampler, 50, 1e-9, 9);
  CHECK(a.residual == b.residual);
  // Sample sets with the same seed are nested, so the max cannot decrease.
  double last = 0.0;
  for (int n : {5, 20, 50, 120}) {
    const auto r = audit_dynamics(prob, sampler, n, 1e-9, 9);
    CHECK(r.residual >= last);
    last = r.residual;
  }
}

TEST_CASE("policy audit separates the canonicalized network from the ablation") {
  Policy eq(small_policy_config(true), 21);
  Policy ab(small_policy_config(false), 21);
  const auto sampler = make_group_sampler("se3").sample;
  const auto good = audit_policy(eq, sampler, 4, 20, 1e-6, 10);
  CHECK(good.pass);
  CHECK(good.residual < 1e-9);
  const auto bad = audit_policy(ab, sampler, 4, 20, 1e-6, 10);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("report verdict covers only evaluated conditions") {
  AuditReport rep;
  rep.target = "dynamics";
  rep.group = "se3";
  CHECK(rep.pass());
  rep.dynamics = {true, 13.9, 1e-9, false, 10};
  CHECK_FALSE(rep.pass());
  const auto j = rep.to_json();
  CHECK(j["verdict"] == "fail");
  CHECK(j["reward_invariance"].is_null());
  CHECK(j["dynamics_equivariance"]["residual"] == 13.9);
  CHECK(rep.table().find("dynamics") != std::string::npos);
}

TEST_CASE("pushforward extension") {
  SUBCASE("trivial group") {
    const auto r = pushforward_demo({0.0}, 1e-12, 11);
    CHECK(r.k == 1);
    CHECK(r.equivariance_residual <= 1e-12);
    CHECK(r.trajectory_deviation == 0.0);
  }
  SUBCASE("quarter turns") {
    const double q = std::numbers::pi / 2;
    const auto r = pushforward_demo({0.0, q, 2 * q, 3 * q}, 1e-12, 12);
    CHECK(r.k == 4);
    CHECK(r.equivariance_pass);
    CHECK(r.equivariance_residual <= 1e-12);
    CHECK(r.trajectory_deviation == 0.0);
  }
  SUBCASE("a nonlinear base field") {
    const PlanarField f = [](const Planar& x, const Planar& u) {
      return Planar(x.x() * x.y() + u.x(), std::sin(x.x()) - x.y() + u.y());
    };
    const double third = 2 * std::numbers::pi / 3;
    const auto r = pushforward_demo({0.0, third, 2 * third}, 1e-12, 13, 200, f);
    CHECK(r.equivariance_residual <= 1e-12);
    CHECK(r.trajectory_deviation == 0.0);
    CHECK(r.steps == 200);
  }
  SUBCASE("invalid sample sets") {
    CHECK_THROWS_AS(pushforward_demo({}, 1e-12, 1), Error);
    CHECK_THROWS_AS(pushforward_demo({0.0, 1.0}, 1e-12, 1), Error);
  }
}
