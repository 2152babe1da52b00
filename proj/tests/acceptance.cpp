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

// Acceptance runner. Each criterion prints one line:
//   criterion <id> PASS|FAIL <name>: <measurements>
// Exit status is 0 when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "equiswarm/kernels.hpp"
#include "equiswarm/trainer.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace equiswarm;
using namespace equiswarm::test;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << (v == 0.0 ? 0.0 : v);
  return out.str();
}

double max_abs(const TensorialFeature& f) {
  double m = f.frame.translation().cwiseAbs().maxCoeff();
  for (double s : f.scalars) m = std::max(m, std::abs(s));
  for (const auto& v : f.vectors) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return worst;
}

Eigen::Matrix<double, 15, 1> flatten(const QuadState& s) {
  Eigen::Matrix<double, 15, 1> z;
  z << s.position, s.velocity, s.body_rate, s.target, s.attitude.col(0);
  return z;
}

Outcome canonicalization() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> n(0.0, 0.5);
  Action<QuadState> in = [](const GroupElement& g, const QuadState& s) { return act_on_state(g, s); };
  Action<TensorialFeature> out = [](const GroupElement& g, const TensorialFeature& f) {
    return act_on_feature(g, f);
  };
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    // A fresh unconstrained body per case: random coefficients over raw coordinates.
    Eigen::Matrix<double, 9, 15> w = Eigen::Matrix<double, 9, 15>::NullaryExpr([&] { return n(rng); });
    auto body = [w](const QuadState& s) {
      const Eigen::Matrix<double, 9, 1> y = w * flatten(s);
      TensorialFeature f;
      f.scalars = {std::sin(y(0)), std::tanh(y(1)), y(2) * y(2)};
      f.add_vector(y.segment<3>(3), true);
      f.add_vector(y.segment<3>(6).array().tanh().matrix());
      return f;
    };
    const auto F = canonicalize<QuadState, TensorialFeature>(body, in, out);
    const GroupElement g = random_se3(rng), q = random_se3(rng);
    const QuadState x = random_quad_state(rng, 3.0);
    const TensorialFeature lhs = F(compose(q, g), act_on_state(q, x));
    const TensorialFeature rhs = act_on_feature(q, F(g, x));
    worst = std::max(worst, feature_distance(lhs, rhs) / std::max(1.0, max_abs(rhs)));
  }
  return {worst <= 1e-5, "max relative error " + fmt(worst) + " over 100 cases (tol 1e-5)"};
}

Outcome policy_equivariance() {
  std::mt19937_64 rng(102);
  Policy eq(PolicyConfig{}, 1);
  PolicyConfig ab_cfg;
  ab_cfg.graphormer.equivariant = false;
  Policy ab(ab_cfg, 1);
  double worst = 0.0;
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    const LocalGraph lg = random_graph(rng, 1 + i % 8);
    const GroupElement g = random_se3(rng);
    worst = std::max(worst, equivariance_error(eq, lg, g));
    violations += equivariance_error(ab, lg, g) > 1e-2;
  }
  return {worst <= 1e-5 && violations >= 95,
          "equivariant max relative error " + fmt(worst) + " (tol 1e-5); ablation violations " +
              std::to_string(violations) + "/100 (need >= 95)"};
}

Outcome permutation_invariance() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  int cases = 0;
  for (bool equivariant : {true, false}) {
    PolicyConfig cfg;
    cfg.graphormer.equivariant = equivariant;
    Policy policy(cfg, 2);
    const SwarmState s = random_swarm(rng, 4, 3.0);
    Tape t0;
    const auto ref = policy.forward(t0, make_batch({build_local_graph(s, 0, std::vector<int>{1, 2, 3})},
                                                   equivariant, cfg.graphormer.heads));
    // Relabel all four agents; the same physical agent stays the ego.
    std::vector<int> label{0, 1, 2, 3};
    do {
      SwarmState p;
      p.agents.resize(4);
      for (int i = 0; i < 4; ++i) p.agents[static_cast<std::size_t>(label[i])] = s.agents[i];
      const int ego = label[0];
      std::vector<int> nbrs;
      for (int j = 0; j < 4; ++j) {
        if (j != ego) nbrs.push_back(j);
      }
      Tape t1;
      const auto o = policy.forward(
          t1, make_batch({build_local_graph(p, ego, nbrs)}, equivariant, cfg.graphormer.heads));
      worst = std::max({worst, max_abs_diff(o.pooled.value(), ref.pooled.value()),
                        max_abs_diff(o.mean.value(), ref.mean.value())});
      ++cases;
    } while (std::next_permutation(label.begin(), label.end()));
  }
  return {worst <= 1e-12, "max deviation " + fmt(worst) + " over " + std::to_string(cases) +
                              " relabelings, both modes (tol 1e-12)"};
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(104);
  Policy policy(PolicyConfig{}, 3);
  LossFixture f = make_loss_fixture(rng, 8);
  const auto fwd = policy_forward_fn(policy, f.buffer);
  const LossFn loss = [&](Tape& tape) {
    return ppo_loss(tape, fwd(tape, f.indices), f.data, f.indices, TrainConfig{}).total;
  };
  ParameterStore& params = policy.params();
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<std::pair<Parameter*, std::size_t>> flat;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) flat.emplace_back(p.get(), i);
  }
  std::shuffle(flat.begin(), flat.end(), rng);
  const double h = 1e-5;
  double worst = 0.0, smallest = INFINITY;
  for (int k = 0; k < 32; ++k) {
    auto [p, i] = flat[static_cast<std::size_t>(k)];
    const Scalar keep = p->value[i];
    p->value[i] = static_cast<Scalar>(keep + h);
    const double up = loss_value(loss);
    p->value[i] = static_cast<Scalar>(keep - h);
    const double down = loss_value(loss);
    p->value[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = static_cast<double>(p->grad[i]);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
    smallest = std::min(smallest, std::abs(analytic));
  }
  return {worst <= 1e-4, "max relative error " + fmt(worst) + " over 32 of " +
                             std::to_string(flat.size()) + " parameters (tol 1e-4; smallest |grad| " +
                             fmt(smallest) + ")"};
}

Outcome symmetry_audit() {
  const QuadParams p;
  const auto prob = quad_dynamics_problem(p);
  const auto trans = audit_dynamics(prob, make_group_sampler("trans").sample, 1000, 1e-9, 105);
  const auto se2z = audit_dynamics(prob, make_group_sampler("se2z").sample, 1000, 1e-9, 105);
  const double probe = quad_rotation_probe(p);
  const double expected = 9.81 * std::numbers::sqrt2;
  const bool pass = trans.pass && se2z.pass && std::abs(probe - expected) <= 1e-6;
  return {pass, "translations " + fmt(trans.residual) + ", z-rotations " + fmt(se2z.residual) +
                    " (tol 1e-9); x quarter turn " + fmt(probe) + " vs " + fmt(expected) +
                    " (tol 1e-6)"};
}

Outcome dynamics_oracles() {
  const QuadParams p;
  QuadState s;
  s.position = Vec3(0, 0, 2);
  for (int i = 0; i < 10; ++i) s = step(s, Vec4::Zero(), p);
  const double fall = std::abs((s.position.z() - 2.0) - (-0.5 * 9.81 * 0.1 * 0.1));

  QuadState h;
  h.position = Vec3(0, 0, 1);
  for (int i = 0; i < 100; ++i) h = step(h, Vec4::Constant(p.hover_action()), p);
  const double drift = (h.position - Vec3(0, 0, 1)).norm();

  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuadState r;
  r.position = Vec3(0, 0, 1);
  for (int i = 0; i < 10000; ++i) r = step(r, Vec4(u(rng), u(rng), u(rng), u(rng)), p);
  const double ortho = orthonormality_error(r.attitude);
  return {fall <= 1e-4 && drift < 1e-6 && ortho <= 1e-8,
          "free fall error " + fmt(fall) + " (tol 1e-4); hover drift " + fmt(drift) +
              " m (tol 1e-6); ||R^T R - I|| " + fmt(ortho) + " (tol 1e-8)"};
}

Outcome reward_examples() {
  const auto c = RewardCoeffs::scaled(0.01);
  QuadState q;
  q.position = q.target = Vec3(1, 2, 3);
  const double at_goal = reward(q, {}, Vec4::Zero(), c, 0.6, false).total;
  q.target = q.position + Vec3(0, 2, 0);
  const double far = reward(q, {}, Vec4::Zero(), c, 0.6, false).position;
  q.target = q.position;
  const double edge = reward(q, {q.position + Vec3(0.6, 0, 0)}, Vec4::Zero(), c, 0.6, false).collision;
  const double half = reward(q, {q.position + Vec3(0, 0, 0.3)}, Vec4::Zero(), c, 0.6, false).collision;
  const double worst = std::max({std::abs(at_goal), std::abs(far + 0.01), std::abs(edge),
                                 std::abs(half + 0.025)});
  return {worst <= 1e-12, "at goal " + fmt(at_goal) + ", 2 m off " + fmt(far) + ", neighbor at d_p " +
                              fmt(edge) + ", neighbor at d_p/2 " + fmt(half) + "; max error " +
                              fmt(worst) + " (tol 1e-12)"};
}

Outcome pushforward() {
  const double q = std::numbers::pi / 2;
  const auto r = pushforward_demo({0.0, q, 2 * q, 3 * q}, 1e-12, 107, 100);
  return {r.equivariance_pass && r.trajectory_deviation == 0.0,
          "C4 residual " + fmt(r.equivariance_residual) + " (tol 1e-12); one-hot deviation over " +
              std::to_string(r.steps) + " steps " + fmt(r.trajectory_deviation) + " (must be 0)"};
}

Outcome ppo_sanity() {
  const double mean = run_bandit(200, 108);
  const auto g = gae(std::vector<double>(3, 1.0), std::vector<double>(4, 0.0),
                     std::vector<std::uint8_t>(3, 0), 0.99, 1.0);
  return {std::abs(mean - 0.3) <= 0.05 && g.advantages[0] == 2.9701,
          "bandit mean after 200 updates " + fmt(mean) + " (target 0.3 +- 0.05); GAE A0 " +
              fmt(g.advantages[0]) + " (exact 2.9701)"};
}

// Criterion 10 setup.
struct SmokeRun {
  double first_reward = 0.0;
  double last10_reward = 0.0;
  double eval_distance = 0.0;
  double seconds = 0.0;
};

std::filesystem::path smoke_config() {
  return std::filesystem::path(EQUISWARM_SOURCE_DIR) / "configs" / "smoke.ini";
}

SmokeRun smoke_run(bool equivariant, std::uint64_t seed) {
  const auto cfg = ExperimentConfig::from_config(
      load_config(smoke_config(), {"policy.equivariant=" + std::string(equivariant ? "true" : "false"),
                                   "train.seed=" + std::to_string(seed)}));
  const auto t0 = std::chrono::steady_clock::now();
  Policy policy(cfg.policy, seed);
  TrainOptions opts;
  opts.threads = thread_budget();
  const TrainResult res = train(cfg, policy, opts);
  if (res.aborted) throw NumericError("smoke run aborted: " + res.abort_reason);
  const auto& h = res.history;
  SmokeRun out;
  out.first_reward = h.front().episode_reward;
  const std::size_t tail = std::min<std::size_t>(10, h.size());
  for (std::size_t i = h.size() - tail; i < h.size(); ++i) out.last10_reward += h[i].episode_reward;
  out.last10_reward /= static_cast<double>(tail);
  out.eval_distance = evaluate_policy(cfg, policy, 10, 1000 + seed).average.mean_final_distance;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  smoke run (" << (equivariant ? "equivariant" : "ablation") << ", seed " << seed
            << "): first " << out.first_reward << ", last-10 " << out.last10_reward
            << ", eval distance " << out.eval_distance << " m, " << out.seconds << " s\n";
  return out;
}

Outcome training_smoke() {
  const SmokeRun r = smoke_run(true, 1);
  return {r.first_reward < r.last10_reward && r.eval_distance < 1.0,
          "episode reward update 1 " + fmt(r.first_reward) + " -> last-10 mean " +
              fmt(r.last10_reward) + "; final mean distance " + fmt(r.eval_distance) +
              " m (need < 1.0); " + fmt(r.seconds) + " s"};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome equivariance_trend() {
  std::vector<double> eq, ab;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    eq.push_back(smoke_run(true, seed).last10_reward);
    ab.push_back(smoke_run(false, seed).last10_reward);
  }
  const double me = median(eq), ma = median(ab);
  return {me >= ma, "median final episode reward over 5 seeds: equivariant " + fmt(me) +
                        ", ablation " + fmt(ma)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "canonicalization identity", canonicalization},
      {2, "policy equivariance", policy_equivariance},
      {3, "permutation invariance", permutation_invariance},
      {4, "gradient oracle", gradient_oracle},
      {5, "symmetry audit", symmetry_audit},
      {6, "dynamics oracles", dynamics_oracles},
      {7, "reward arithmetic", reward_examples},
      {8, "push-forward demo", pushforward},
      {9, "PPO sanity", ppo_sanity},
      {10, "training smoke test", training_smoke},
      {11, "equivariant vs ablation trend", equivariance_trend},
  };
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) {
    for (const auto& c : all) selected.push_back(c.id);
  }

  std::cerr << "kernels: " << kernels::isa_name(kernels::active().isa) << ", scalar: " << (kDouble ? "f64" : "f32") << "\n";
  bool ok = true;
  for (int id : selected) {
    const Criterion& c = all[static_cast<std::size_t>(id - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name << ": "
              << o.detail << " [" << fmt(secs) << " s]" << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
