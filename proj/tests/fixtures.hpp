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
// Policy and PPO fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "equiswarm/audit.hpp"
#include "equiswarm/errors.hpp"
#include "equiswarm/optim.hpp"
#include "equiswarm/policy.hpp"
#include "equiswarm/ppo.hpp"

namespace equiswarm::test {

inline PolicyConfig small_policy_config(bool equivariant = true) {
  PolicyConfig c;
  c.graphormer.layers = 2;
  c.graphormer.m0 = 6;
  c.graphormer.m1 = 4;
  c.graphormer.heads = 2;
  c.graphormer.equivariant = equivariant;
  c.zeta1 = 16;
  c.zeta2 = 12;
  c.zeta3 = 16;
  c.zeta_out = 16;
  c.head_hidden = 10;
  return c;
}

// Ego 0's graph over a random swarm of n agents.
inline LocalGraph random_graph(std::mt19937_64& rng, int n, double extent = 3.0) {
  return build_local_graph(random_swarm(rng, n, extent), 0, n - 1);
}

inline LocalGraph transform_graph(const GroupElement& g, const LocalGraph& lg) {
  SwarmState s;
  for (const auto& q : lg.states) s.agents.push_back(act_on_state(g, q));
  std::vector<int> nbrs;
  for (int j = 1; j < lg.node_count(); ++j) nbrs.push_back(j);
  return build_local_graph(s, 0, nbrs);
}

// || pi_hat(g X) - g pi_hat(X) || / max(|| g pi_hat(X) ||, 1).
inline double equivariance_error(const Policy& policy, const LocalGraph& lg,
                                 const GroupElement& g) {
  const int q = policy.config().zeta_out / 4;
  const Tensor expected = act_on_output(g, evaluate(policy, {lg}).equi, q, q);
  return relative_error(evaluate(policy, {transform_graph(g, lg)}).equi, expected);
}

// A fixed minibatch of random transitions for loss and gradient checks.
struct LossFixture {
  RolloutBuffer buffer;
  PpoData data;
  std::vector<int> indices;
};

inline LossFixture make_loss_fixture(std::mt19937_64& rng, int n) {
  LossFixture f;
  f.buffer.allocate(1, 1, n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  f.data.n = n;
  f.data.action_dim = 4;
  for (int i = 0; i < n; ++i) {
    f.buffer.graphs[static_cast<std::size_t>(i)] = random_graph(rng, 2 + i % 4);
    for (int k = 0; k < 4; ++k) f.data.actions.push_back(u(rng));
    f.data.old_log_probs.push_back(-2.0 + 0.5 * u(rng));
    f.data.advantages.push_back(u(rng));
    f.data.returns.push_back(u(rng));
    f.indices.push_back(i);
  }
  return f;
}

// One-state bandit with a 1-D Gaussian policy: reward -|a - 0.3|.
struct Bandit {
  ParameterStore params;
  Parameter* mean;
  Parameter* log_std;
  Parameter* value;

  Bandit() {
    mean = &params.add("mean", Tensor::matrix(1, 1, 0.0));
    log_std = &params.add("log_std", Tensor::matrix(1, 1, std::log(0.5)));
    value = &params.add("value", Tensor::matrix(1, 1, 0.0));
  }

  PpoForward forward(Tape& tape, std::span<const int> idx) const {
    const Var ones = tape.constant(Tensor::matrix(static_cast<int>(idx.size()), 1, 1.0));
    return {ops::matmul(ones, tape.param(*mean)), ops::matmul(ones, tape.param(*value)),
            tape.param(*log_std)};
  }
};

// PPO on the bandit with single-step episodes; returns the final action mean.
inline double run_bandit(int updates, std::uint64_t seed) {
  Bandit b;
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 64;
  cfg.epochs = 4;
  cfg.entropy_coef = 0.0;
  Adam adam(cfg.adam());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto fwd = [&](Tape& t, std::span<const int> idx) { return b.forward(t, idx); };
  for (int update = 0; update < updates; ++update) {
    const double mu = b.mean->value[0], ls = b.log_std->value[0], v = b.value->value[0];
    PpoData data;
    data.n = 64;
    data.action_dim = 1;
    for (int i = 0; i < data.n; ++i) {
      const double a = mu + std::exp(ls) * normal(rng);
      const double r = -std::abs(a - 0.3);
      data.actions.push_back(a);
      data.old_log_probs.push_back(gaussian_log_prob(std::vector<double>{a}, std::vector<double>{mu},
                                                     std::vector<double>{ls}));
      // A = r - V, return = r.
      data.advantages.push_back(r - v);
      data.returns.push_back(r);
    }
    normalize_advantages(data.advantages);
    if (ppo_update(b.params, adam, data, fwd, cfg, rng).aborted) {
      throw NumericError("bandit update aborted");
    }
  }
  return b.mean->value[0];
}

}  // namespace equiswarm::test
