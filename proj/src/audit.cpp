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

#include "equiswarm/audit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "equiswarm/errors.hpp"
#include "equiswarm/policy.hpp"

namespace equiswarm {

NamedSampler make_group_sampler(const std::string& name, double half_extent) {
  std::ostringstream range;
  range << "translations uniform in [" << -half_extent << ", " << half_extent << "]^3 m";
  if (name == "se3") {
    return {name, "rotation: uniform axis, angle uniform on [0, pi]; " + range.str(),
            [half_extent](std::mt19937_64& rng) { return random_se3(rng, half_extent); }};
  }
  if (name == "so3") {
    return {name, "rotation: uniform axis, angle uniform on [0, pi]; no translation",
            [](std::mt19937_64& rng) { return GroupElement::from_rotation(random_rotation(rng)); }};
  }
  if (name == "se2z") {
    return {name, "rotation about z, angle uniform on [-pi, pi]; " + range.str(),
            [half_extent](std::mt19937_64& rng) {
              std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
              const Mat3 r = rot_z(a(rng));
              return GroupElement(r, random_se3(rng, half_extent).translation());
            }};
  }
  if (name == "trans") {
    return {name, range.str(), [half_extent](std::mt19937_64& rng) {
              return GroupElement::from_translation(random_se3(rng, half_extent).translation());
            }};
  }
  if (name == "identity") {
    return {name, "identity only", [](std::mt19937_64&) { return GroupElement::identity(); }};
  }
  throw ConfigError("unknown group '" + name + "' (expected se3, so3, se2z, trans, identity)");
}

bool AuditReport::pass() const {
  bool ok = true;
  for (const auto* c : {&reward, &dynamics, &policy}) {
    if (c->evaluated) ok = ok && c->pass;
  }
  return ok;
}

namespace {

nlohmann::json condition_json(const ConditionResult& c) {
  if (!c.evaluated) return nullptr;
  return {{"residual", c.residual},
          {"tolerance", c.tolerance},
          {"verdict", c.pass ? "pass" : "fail"},
          {"samples", c.samples}};
}

}  // namespace

nlohmann::json AuditReport::to_json() const {
  return {{"target", target},
          {"group", group},
          {"sampling", sampling},
          {"seed", seed},
          {"reward_invariance", condition_json(reward)},
          {"dynamics_equivariance", condition_json(dynamics)},
          {"policy_equivariance", condition_json(policy)},
          {"verdict", pass() ? "pass" : "fail"},
          {"extra", extra}};
}

std::string AuditReport::table() const {
  std::ostringstream out;
  out << "target  " << target << "\ngroup   " << group << " (" << sampling << ")\nseed    "
      << seed << "\n";
  out << std::left << std::setw(24) << "condition" << std::setw(16) << "residual"
      << std::setw(12) << "tolerance" << std::setw(9) << "samples"
      << "verdict\n";
  auto row = [&](const char* name, const ConditionResult& c) {
    if (!c.evaluated) return;
    out << std::left << std::setw(24) << name << std::setw(16) << std::setprecision(9)
        << c.residual << std::setw(12) << std::setprecision(3) << c.tolerance << std::setw(9)
        << c.samples << (c.pass ? "pass" : "fail") << "\n";
  };
  row("reward invariance", reward);
  row("dynamics equivariance", dynamics);
  row("policy equivariance", policy);
  return out.str();
}

ConditionResult max_residual(
    const GroupSampler& sampler,
    const std::function<double(const GroupElement&, std::mt19937_64&)>& probe, int n, double tol,
    std::uint64_t seed) {
  if (n < 1) throw Error("audit: need at least one sample");
  std::mt19937_64 rng(seed);
  ConditionResult c;
  c.evaluated = true;
  c.tolerance = tol;
  c.samples = n;
  for (int i = 0; i < n; ++i) {
    const GroupElement g = sampler(rng);
    const double r = probe(g, rng);
    c.residual = std::isnan(r) ? r : std::max(c.residual, r);
  }
  c.pass = c.residual <= tol;
  return c;
}

QuadState random_quad_state(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto vec = [&](double s) { return Vec3(s * u(rng), s * u(rng), s * u(rng)); };
  QuadState q;
  q.position = vec(extent);
  q.velocity = vec(2.0);
  q.attitude = random_rotation(rng);
  q.body_rate = vec(3.0);
  q.target = vec(extent);
  return q;
}

SwarmState random_swarm(std::mt19937_64& rng, int n_agents, double extent) {
  SwarmState s;
  for (int i = 0; i < n_agents; ++i) s.agents.push_back(random_quad_state(rng, extent));
  return s;
}

SwarmRewardFn swarm_reward_fn(const EnvConfig& cfg) {
  return [cfg](const SwarmState& s, const std::vector<Vec4>& u) {
    std::vector<double> out;
    for (const auto& r : instantaneous_rewards(s, u, cfg)) out.push_back(r.total);
    return out;
  };
}

ConditionResult audit_reward(const SwarmRewardFn& reward_fn, const GroupSampler& sampler,
                             int n_agents, int n, double tol, std::uint64_t seed) {
  return max_residual(
      sampler,
      [&](const GroupElement& g, std::mt19937_64& rng) {
        SwarmState s = random_swarm(rng, n_agents);
        // Place some agents within the proximity and contact radii.
        if (n_agents > 1) {
          s.agents[1].position = s.agents[0].position + Vec3(0.05, 0.2, -0.1);
        }
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        std::vector<Vec4> actions(static_cast<std::size_t>(n_agents));
        for (auto& a : actions) a = Vec4(u(rng), u(rng), u(rng), u(rng));
        SwarmState gs = s;
        for (auto& q : gs.agents) q = act_on_state(g, q);
        const auto r0 = reward_fn(s, actions);
        const auto r1 = reward_fn(gs, actions);
        double worst = 0.0;
        for (std::size_t i = 0; i < r0.size(); ++i) worst = std::max(worst, std::abs(r0[i] - r1[i]));
        return worst;
      },
      n, tol, seed);
}

StateDerivative differential_action(const GroupElement& g, const StateDerivative& d) {
  const Mat3& r = g.rotation();
  return {r * d.position, r * d.velocity, r * d.attitude, d.body_rate};
}

double derivative_distance(const StateDerivative& a, const StateDerivative& b) {
  return std::sqrt((a.position - b.position).squaredNorm() + (a.velocity - b.velocity).squaredNorm() +
                   (a.attitude - b.attitude).squaredNorm() +
                   (a.body_rate - b.body_rate).squaredNorm());
}

DynamicsAuditProblem<QuadState, Vec4, StateDerivative> quad_dynamics_problem(const QuadParams& p) {
  DynamicsAuditProblem<QuadState, Vec4, StateDerivative> prob;
  prob.f = [p](const QuadState& s, const Vec4& a) { return derivative(s, a, p); };
  prob.phi = [](const GroupElement& g, const QuadState& s) { return act_on_state(g, s); };
  prob.psi = [](const GroupElement&, const Vec4& a) { return a; };
  prob.dphi = [](const GroupElement& g, const QuadState&, const StateDerivative& d) {
    return differential_action(g, d);
  };
  prob.distance = derivative_distance;
  prob.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::make_pair(random_quad_state(rng), Vec4(u(rng), u(rng), u(rng), u(rng)));
  };
  return prob;
}

double quad_rotation_probe(const QuadParams& p) {
  const auto prob = quad_dynamics_problem(p);
  QuadState s;
  const Vec4 a = Vec4::Constant(p.hover_action());
  return dynamics_residual(prob, GroupElement::from_rotation(rot_x(std::numbers::pi / 2)), s, a);
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("relative_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    num += d * d;
    den += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1.0);
}

ConditionResult audit_policy(const Policy& policy, const GroupSampler& sampler, int n_agents,
                             int n, double tol, std::uint64_t seed) {
  const int q = policy.config().zeta_out / 4;
  return max_residual(
      sampler,
      [&](const GroupElement& g, std::mt19937_64& rng) {
        const SwarmState s = random_swarm(rng, n_agents, 3.0);
        SwarmState gs = s;
        for (auto& a : gs.agents) a = act_on_state(g, a);
        std::vector<LocalGraph> base, moved;
        for (int i = 0; i < n_agents; ++i) {
          base.push_back(build_local_graph(s, i, n_agents - 1));
          moved.push_back(build_local_graph(gs, i, n_agents - 1));
        }
        const Tensor expected = act_on_output(g, evaluate(policy, base).equi, q, q);
        return relative_error(evaluate(policy, moved).equi, expected);
      },
      n, tol, seed);
}

nlohmann::json PushforwardReport::to_json() const {
  return {{"k", k},
          {"equivariance_residual", equivariance_residual},
          {"equivariance_verdict", equivariance_pass ? "pass" : "fail"},
          {"trajectory_deviation", trajectory_deviation},
          {"steps", steps}};
}

namespace {

Eigen::Matrix2d planar_rotation(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

// Index of the sample whose angle equals `a` modulo 2 pi.
int find_angle(const std::vector<double>& angles, double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double d = std::remainder(a - angles[j], two_pi);
    if (std::abs(d) < 1e-9) return static_cast<int>(j);
  }
  return -1;
}

}  // namespace

PushforwardReport pushforward_demo(const std::vector<double>& angles, double tol,
                                   std::uint64_t seed, int steps, PlanarField field) {
  const int k = static_cast<int>(angles.size());
  if (k < 1 || k > 8) throw Error("pushforward_demo: need 1 to 8 group samples");
  if (!field) field = [](const Planar&, const Planar& u) { return u; };
  std::vector<Eigen::Matrix2d> rots;
  for (double a : angles) rots.push_back(planar_rotation(a));
  // compose[h][j] = index of g_h g_j.
  std::vector<std::vector<int>> compose(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k)));
  for (int h = 0; h < k; ++h) {
    for (int j = 0; j < k; ++j) {
      const int idx = find_angle(angles, angles[static_cast<std::size_t>(h)] + angles[static_cast<std::size_t>(j)]);
      if (idx < 0) throw Error("pushforward_demo: sample angles are not closed under composition");
      compose[static_cast<std::size_t>(h)][static_cast<std::size_t>(j)] = idx;
    }
  }

  struct Extended {
    std::vector<double> alpha;
    std::vector<Planar> u;
  };
  auto F = [&](const Planar& x, const Extended& uh) {
    Planar out = Planar::Zero();
    for (int j = 0; j < k; ++j) {
      const auto& r = rots[static_cast<std::size_t>(j)];
      out += uh.alpha[static_cast<std::size_t>(j)] * (r * field(r.transpose() * x, uh.u[static_cast<std::size_t>(j)]));
    }
    return out;
  };
  // Input action of g_h: the block for g_j moves to g_h g_j.
  auto psi = [&](int h, const Extended& uh) {
    Extended out{std::vector<double>(static_cast<std::size_t>(k)), std::vector<Planar>(static_cast<std::size_t>(k))};
    for (int j = 0; j < k; ++j) {
      const auto dst = static_cast<std::size_t>(compose[static_cast<std::size_t>(h)][static_cast<std::size_t>(j)]);
      out.alpha[dst] = uh.alpha[static_cast<std::size_t>(j)];
      out.u[dst] = uh.u[static_cast<std::size_t>(j)];
    }
    return out;
  };

  PushforwardReport rep;
  rep.k = k;
  rep.steps = steps;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Planar x(3 * unif(rng), 3 * unif(rng));
    Extended uh{std::vector<double>(static_cast<std::size_t>(k)), std::vector<Planar>(static_cast<std::size_t>(k))};
    for (int j = 0; j < k; ++j) {
      uh.alpha[static_cast<std::size_t>(j)] = unif(rng);
      uh.u[static_cast<std::size_t>(j)] = Planar(unif(rng), unif(rng));
    }
    for (int h = 0; h < k; ++h) {
      const auto& r = rots[static_cast<std::size_t>(h)];
      const Planar lhs = r * F(x, uh);
      const Planar rhs = F(r * x, psi(h, uh));
      rep.equivariance_residual = std::max(rep.equivariance_residual, (lhs - rhs).norm());
    }
  }
  rep.equivariance_pass = rep.equivariance_residual <= tol;

  const int e = find_angle(angles, 0.0);
  if (e < 0) throw Error("pushforward_demo: sample set must contain the identity");
  const double dt = 0.01;
  Planar xf(1.0, -0.5), xe = xf;
  for (int t = 0; t < steps; ++t) {
    const Planar u(std::sin(0.1 * t), std::cos(0.07 * t));
    Extended onehot{std::vector<double>(static_cast<std::size_t>(k), 0.0),
                    std::vector<Planar>(static_cast<std::size_t>(k), Planar::Zero())};
    onehot.alpha[static_cast<std::size_t>(e)] = 1.0;
    onehot.u[static_cast<std::size_t>(e)] = u;
    xf = xf + dt * field(xf, u);
    xe = xe + dt * F(xe, onehot);
    rep.trajectory_deviation = std::max(rep.trajectory_deviation, (xf - xe).cwiseAbs().maxCoeff());
  }
  return rep;
}

}  // namespace equiswarm
