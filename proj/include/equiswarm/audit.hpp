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
// Sampling checks of the two symmetry conditions: the objective is invariant
// under the group, and the dynamics commute with the group actions.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "equiswarm/group.hpp"
#include "equiswarm/quad.hpp"
#include "equiswarm/swarm.hpp"
#include "equiswarm/tensor.hpp"

namespace equiswarm {

class Policy;

using GroupSampler = std::function<GroupElement(std::mt19937_64&)>;

struct NamedSampler {
  std::string name;
  std::string description;
  GroupSampler sample;
};

// se3, so3, se2z (z-rotations and translations), trans, identity.
// Throws ConfigError for anything else.
NamedSampler make_group_sampler(const std::string& name, double half_extent = 5.0);

struct ConditionResult {
  bool evaluated = false;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  int samples = 0;
};

struct AuditReport {
  std::string target;
  std::string group;
  std::string sampling;
  std::uint64_t seed = 0;
  ConditionResult reward;    // condition 1
  ConditionResult dynamics;  // condition 2
  ConditionResult policy;    // canonicalization identity on a trained network
  nlohmann::json extra = nlohmann::json::object();

  // Every evaluated condition passes.
  bool pass() const;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Generic sampling loop: residual = max over n samples of `probe(g, rng)`.
ConditionResult max_residual(const GroupSampler& sampler,
                             const std::function<double(const GroupElement&, std::mt19937_64&)>& probe,
                             int n, double tol, std::uint64_t seed);

using SwarmRewardFn =
    std::function<std::vector<double>(const SwarmState&, const std::vector<Vec4>&)>;

// Joint states with targets; positions and targets uniform in [-extent, extent]^3.
SwarmState random_swarm(std::mt19937_64& rng, int n_agents, double extent = 5.0);
QuadState random_quad_state(std::mt19937_64& rng, double extent = 5.0);

// max over samples and agents of |r_i(x, u) - r_i(g x, u)|. Actions are frame
// scalars and are left unchanged.
ConditionResult audit_reward(const SwarmRewardFn& reward_fn, const GroupSampler& sampler,
                             int n_agents, int n, double tol, std::uint64_t seed);

// The environment's reward without room terms or contact memory.
SwarmRewardFn swarm_reward_fn(const EnvConfig& cfg);

// Condition 2 for an arbitrary system: residual = || dphi_g f(x, u) - f(phi_g x, psi_g u) ||.
template <typename X, typename U, typename D>
struct DynamicsAuditProblem {
  std::function<D(const X&, const U&)> f;
  std::function<X(const GroupElement&, const X&)> phi;
  std::function<U(const GroupElement&, const U&)> psi;
  std::function<D(const GroupElement&, const X&, const D&)> dphi;
  std::function<double(const D&, const D&)> distance;
  std::function<std::pair<X, U>(std::mt19937_64&)> sample;
};

template <typename X, typename U, typename D>
double dynamics_residual(const DynamicsAuditProblem<X, U, D>& p, const GroupElement& g,
                         const X& x, const U& u) {
  return p.distance(p.dphi(g, x, p.f(x, u)), p.f(p.phi(g, x), p.psi(g, u)));
}

template <typename X, typename U, typename D>
ConditionResult audit_dynamics(const DynamicsAuditProblem<X, U, D>& p, const GroupSampler& sampler,
                               int n, double tol, std::uint64_t seed) {
  return max_residual(
      sampler,
      [&](const GroupElement& g, std::mt19937_64& rng) {
        const auto [x, u] = p.sample(rng);
        return dynamics_residual(p, g, x, u);
      },
      n, tol, seed);
}

// Quadrotor rigid body: state action from act_on_state, thrusts unchanged, and
// the analytic differential that rotates rates and left-multiplies R-dot.
DynamicsAuditProblem<QuadState, Vec4, StateDerivative> quad_dynamics_problem(const QuadParams& p);
StateDerivative differential_action(const GroupElement& g, const StateDerivative& d);
double derivative_distance(const StateDerivative& a, const StateDerivative& b);

// Residual at the fixed probe g = (R_x(90 deg), 0), hover state at the origin.
double quad_rotation_probe(const QuadParams& p);

// Canonicalization identity of the trunk output on random local graphs:
// max relative error between pi_hat(g X) and g pi_hat(X).
ConditionResult audit_policy(const Policy& policy, const GroupSampler& sampler, int n_agents,
                             int n, double tol, std::uint64_t seed);
// Relative error ||a - b|| / max(||b||, 1).
double relative_error(const Tensor& a, const Tensor& b);

struct PushforwardReport {
  int k = 0;
  double equivariance_residual = 0.0;
  bool equivariance_pass = false;
  double trajectory_deviation = 0.0;
  int steps = 0;
  nlohmann::json to_json() const;
};

// Extended 2-D system F(x, u_hat) = sum_j alpha_j R_j f(R_j^T x, u_j) for the
// planar rotations at `angles` (which must form a group under addition mod
// 2 pi). Checks F's equivariance under those rotations and that the one-hot
// input at the identity reproduces f's Euler trajectory.
using Planar = Eigen::Vector2d;
using PlanarField = std::function<Planar(const Planar&, const Planar&)>;
PushforwardReport pushforward_demo(const std::vector<double>& angles, double tol,
                                   std::uint64_t seed, int steps = 100,
                                   PlanarField field = nullptr);

}  // namespace equiswarm
