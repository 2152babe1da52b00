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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "equiswarm/errors.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace equiswarm;
using namespace equiswarm::test;

namespace {

QuadState random_state(std::mt19937_64& rng) { return random_quad_state(rng, 3.0); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return worst;
}

// Signed permutation with determinant +1: every product is exact.
Mat3 exact_rotation() {
  Mat3 r;
  r << 0, -1, 0, 0, 0, 1, -1, 0, 0;
  return r;
}

}  // namespace

TEST_CASE("encode_node in the agent's own frame") {
  QuadState s;
  s.position = s.target = Vec3(1.0, -2.0, 0.5);
  const auto f = encode_node(s, GroupElement::pose_of(s));
  REQUIRE(f.vectors.size() == kRawVectors);
  CHECK(f.vectors[0].norm() == 0.0);
  CHECK(f.vectors[1].norm() == 0.0);
  CHECK(f.vectors[4] == Vec3::UnitX());
  CHECK(f.vectors[5] == Vec3::UnitY());
  CHECK(f.vectors[6] == Vec3::UnitZ());
}

TEST_CASE("encode_node with the identity frame returns world quantities") {
  std::mt19937_64 rng(31);
  const QuadState s = random_state(rng);
  const auto f = encode_node(s, GroupElement::identity());
  CHECK(f.vectors[0] == s.position);
  CHECK(f.vectors[1] == s.target);
  CHECK(f.vectors[2] == s.velocity);
  CHECK((f.vectors[3] - s.world_rate()).norm() < 1e-15);
  for (int c = 0; c < 3; ++c) CHECK(f.vectors[4 + c] == Vec3(s.attitude.col(c)));
}

TEST_CASE("encode_node scalars are the norms and pairwise dots") {
  std::mt19937_64 rng(32);
  const QuadState s = random_state(rng);
  const auto f = encode_node(s, random_se3(rng));
  REQUIRE(f.scalars.size() == kRawScalars);
  int k = kRawVectors;
  for (int i = 0; i < kRawVectors; ++i) {
    CHECK(f.scalars[i] == doctest::Approx(f.vectors[i].norm()).epsilon(1e-14));
    for (int j = i + 1; j < kRawVectors; ++j) {
      CHECK(f.scalars[k++] == doctest::Approx(f.vectors[i].dot(f.vectors[j])).epsilon(1e-12));
    }
  }
}

TEST_CASE("transforming state and frame together cancels") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    // Dyadic state values keep every product and sum exact.
    std::uniform_int_distribution<int> q(-64, 64);
    auto dyadic = [&] { return Vec3(q(rng), q(rng), q(rng)) / 16.0; };
    QuadState s;
    s.position = dyadic();
    s.target = dyadic();
    s.velocity = dyadic();
    s.body_rate = dyadic();
    s.attitude = exact_rotation();
    const GroupElement frame(exact_rotation().transpose(), Vec3(0.25, -1.5, 2.0));
    const GroupElement g(exact_rotation(), Vec3(4.0, 0.5, -8.0));
    // Exact arithmetic: bitwise equality.
    const auto a = encode_raw(s, frame);
    const auto b = encode_raw(act_on_state(g, s), compose(g, frame));
    CHECK(a == b);
    // Generic rotations: equality up to rounding.
    const QuadState r = random_state(rng);
    const GroupElement h = random_se3(rng), fr = random_se3(rng);
    const auto c = encode_raw(r, fr);
    const auto d = encode_raw(act_on_state(h, r), compose(h, fr));
    for (int i = 0; i < kRawWidth; ++i) CHECK(std::abs(c[i] - d[i]) < 1e-12 * (1.0 + std::abs(c[i])));
  }
}

TEST_CASE("single-node attention returns the value projection") {
  std::mt19937_64 rng(34);
  Policy policy(small_policy_config(), 7);
  const GraphBatch batch = make_batch({random_graph(rng, 1)}, true, 2);
  const int width = policy.config().graphormer.width();
  Tape tape;
  const Tensor f = random_tensor({1, width}, rng);
  const Var x = tape.constant(f);
  const Var out = policy.attention(tape, batch, 1, x, x);
  const Var expected = ops::matmul(x, tape.constant(policy.params().get("layer1.wv.weight").value));
  CHECK(max_abs_diff(out.value(), expected.value()) < 1e-14);
}

TEST_CASE("identical nodes receive identical updates") {
  std::mt19937_64 rng(35);
  Policy policy(small_policy_config(), 8);
  SwarmState s;
  s.agents.assign(2, random_state(rng));
  const GraphBatch batch = make_batch({build_local_graph(s, 0, 1)}, true, 2);
  Tape tape;
  const Tensor h = policy.forward(tape, batch).node_features.value();
  for (int c = 0; c < h.cols(); ++c) CHECK(h.at(0, c) == h.at(1, c));
}

TEST_CASE("permuting nodes permutes layer outputs and leaves the ego output unchanged") {
  std::mt19937_64 rng(36);
  for (bool equivariant : {true, false}) {
    Policy policy(small_policy_config(equivariant), 9);
    const SwarmState s = random_swarm(rng, 4, 3.0);
    const LocalGraph base = build_local_graph(s, 0, std::vector<int>{1, 2, 3});
    Tape t0;
    const auto out0 = policy.forward(t0, make_batch({base}, equivariant, 2));
    std::vector<int> perm{1, 2, 3};
    do {
      const LocalGraph lg = build_local_graph(s, 0, perm);
      Tape t1;
      const auto out1 = policy.forward(t1, make_batch({lg}, equivariant, 2));
      CHECK(max_abs_diff(out1.pooled.value(), out0.pooled.value()) <= 1e-12);
      CHECK(max_abs_diff(out1.mean.value(), out0.mean.value()) <= 1e-12);
      const Tensor& h0 = out0.node_features.value();
      const Tensor& h1 = out1.node_features.value();
      for (int v = 1; v < 4; ++v) {
        for (int c = 0; c < h0.cols(); ++c) {
          CHECK(std::abs(h1.at(v, c) - h0.at(perm[v - 1], c)) <= 1e-12);
        }
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("trunk output is equivariant, the ablation is not") {
  std::mt19937_64 rng(37);
  Policy eq(small_policy_config(true), 10);
  Policy ab(small_policy_config(false), 10);
  int violations = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const LocalGraph lg = random_graph(rng, 1 + trial % 6);
    const GroupElement g = random_se3(rng);
    CHECK(equivariance_error(eq, lg, g) < 1e-9);
    violations += equivariance_error(ab, lg, g) > 1e-2;
  }
  CHECK(violations >= 25);
}

TEST_CASE("action mean and value ignore joint translations") {
  std::mt19937_64 rng(38);
  Policy policy(small_policy_config(), 11);
  for (int trial = 0; trial < 10; ++trial) {
    const LocalGraph lg = random_graph(rng, 4);
    const auto g = GroupElement::from_translation(Vec3(3.0, -7.0, 1.5) * (trial + 1));
    const PolicyEval a = evaluate(policy, {lg});
    const PolicyEval b = evaluate(policy, {transform_graph(g, lg)});
    CHECK(max_abs_diff(a.mean, b.mean) < 1e-9);
    CHECK(max_abs_diff(a.value, b.value) < 1e-9);
  }
}

TEST_CASE("batched evaluation matches one graph at a time") {
  std::mt19937_64 rng(39);
  Policy policy(small_policy_config(), 12);
  std::vector<LocalGraph> graphs;
  for (int n : {1, 3, 5, 2}) graphs.push_back(random_graph(rng, n));
  const PolicyEval all = evaluate(policy, graphs);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const PolicyEval one = evaluate(policy, {graphs[i]});
    for (int c = 0; c < 4; ++c) {
      CHECK(std::abs(all.mean.at(static_cast<int>(i), c) - one.mean.at(0, c)) < 1e-12);
    }
    CHECK(std::abs(all.value.at(static_cast<int>(i), 0) - one.value.at(0, 0)) < 1e-12);
  }
}

TEST_CASE("initial action distribution") {
  std::mt19937_64 rng(40);
  PolicyConfig cfg = small_policy_config();
  cfg.init_mean = -0.1171;
  Policy policy(cfg, 13);
  const PolicyEval e = evaluate(policy, {random_graph(rng, 3)});
  for (int c = 0; c < 4; ++c) {
    CHECK(e.log_std.at(0, c) == doctest::Approx(std::log(0.5)));
    // The output layer starts with a small gain around the configured bias.
    CHECK(std::abs(e.mean.at(0, c) - cfg.init_mean) < 0.1);
  }
}

TEST_CASE("policy gradients match central differences") {
  std::mt19937_64 rng(41);
  PolicyConfig cfg = small_policy_config();
  cfg.graphormer.m0 = 3;
  cfg.graphormer.m1 = 3;
  cfg.zeta1 = cfg.zeta2 = cfg.zeta3 = cfg.zeta_out = 8;
  cfg.head_hidden = 4;
  Policy policy(cfg, 14);
  const std::vector<LocalGraph> graphs{random_graph(rng, 3), random_graph(rng, 2)};
  const GraphBatch batch = make_batch(graphs, true, 2);
  const LossFn loss = [&](Tape& tape) {
    const auto out = policy.forward(tape, batch);
    return ops::add(ops::add(probe_loss(tape, out.mean, 1), probe_loss(tape, out.value, 2)),
                    probe_loss(tape, out.log_std, 3));
  };
  CHECK(gradient_error(policy.params(), loss) < kGradTol);
}

TEST_CASE("policy config validation and round trip") {
  PolicyConfig c = small_policy_config();
  CHECK_NOTHROW(c.validate());
  const PolicyConfig back = policy_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  c.zeta_out = 18;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_policy_config();
  c.graphormer.heads = 4;  // width 18 is not divisible by 4
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
