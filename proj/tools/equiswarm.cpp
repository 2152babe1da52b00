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

// Command-line entry point: train, eval, audit, demo-pushforward, export-traj.
// Exit codes: 0 success or audit pass, 1 runtime failure or audit fail,
// 2 usage or configuration error.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "equiswarm/audit.hpp"
#include "equiswarm/errors.hpp"
#include "equiswarm/kernels.hpp"
#include "equiswarm/trainer.hpp"

namespace fs = std::filesystem;
using namespace equiswarm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ckpt;
  int episodes = 50;
  std::string group = "se3";
  int n = 100;
  std::optional<double> tol;
  std::string target;
};

ExperimentConfig experiment(const Options& o) {
  if (!o.config.empty() && !fs::exists(o.config)) {
    throw ConfigError("config file not found: " + o.config);
  }
  Config cfg = load_config(o.config, o.overrides);
  if (o.seed) cfg.set("train", "seed", std::to_string(*o.seed));
  return ExperimentConfig::from_config(cfg);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

int run_train(const Options& o) {
  const ExperimentConfig cfg = experiment(o);
  const fs::path out = o.out.empty() ? fs::path("runs/train") : fs::path(o.out);
  fs::create_directories(out);
  Policy policy(cfg.policy, cfg.train.seed);
  std::signal(SIGINT, on_sigint);
  TrainOptions opts;
  opts.out_dir = out;
  opts.threads = std::min(thread_budget(), cfg.train.workers);
  opts.stop = &g_stop;
  opts.on_update = [](const UpdateRecord& r) {
    std::cerr << "update " << r.update << " steps " << r.steps << " episode_reward "
              << r.episode_reward << " distance " << r.mean_distance << "\n";
  };
  const TrainResult res = train(cfg, policy, opts);
  nlohmann::json summary;
  summary["config"] = cfg.to_json();
  summary["kernels"] = kernels::isa_name(kernels::active().isa);
  summary["updates"] = res.history.size();
  summary["steps"] = res.history.empty() ? 0 : res.history.back().steps;
  summary["first_update"] = res.history.empty() ? nlohmann::json() : res.history.front().to_json();
  summary["last_update"] = res.history.empty() ? nlohmann::json() : res.history.back().to_json();
  summary["checkpoint"] = res.last_checkpoint.string();
  summary["interrupted"] = res.interrupted;
  summary["aborted"] = res.aborted;
  if (res.aborted) summary["abort_reason"] = res.abort_reason;
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return res.aborted ? kExitFailure : kExitOk;
}

int run_eval(const Options& o) {
  if (o.ckpt.empty()) throw ConfigError("eval requires --ckpt");
  const ExperimentConfig cfg = experiment(o);
  const auto policy = load_policy(o.ckpt);
  const std::uint64_t seed = o.seed.value_or(cfg.train.seed);
  const EvalResult res = evaluate_policy(cfg, *policy, o.episodes, seed);
  nlohmann::json summary = to_json(res.average);
  summary["seed"] = seed;
  summary["checkpoint"] = o.ckpt;
  if (!o.out.empty()) {
    const fs::path out(o.out);
    fs::create_directories(out);
    std::ofstream rows(out / "eval.jsonl");
    for (std::size_t e = 0; e < res.episodes.size(); ++e) {
      nlohmann::json j = to_json(res.episodes[e]);
      j["episode"] = e;
      rows << j.dump() << "\n";
    }
    write_json(out / "eval_summary.json", summary);
  } else {
    for (std::size_t e = 0; e < res.episodes.size(); ++e) {
      nlohmann::json j = to_json(res.episodes[e]);
      j["episode"] = e;
      std::cout << j.dump() << "\n";
    }
  }
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int run_audit(const Options& o) {
  const NamedSampler sampler = make_group_sampler(o.group);
  const ExperimentConfig cfg = experiment(o);
  const std::uint64_t seed = o.seed.value_or(cfg.train.seed);
  AuditReport rep;
  rep.target = o.target;
  rep.group = sampler.name;
  rep.sampling = sampler.description;
  rep.seed = seed;
  if (o.target == "reward") {
    rep.reward = audit_reward(swarm_reward_fn(cfg.env), sampler.sample, std::max(2, cfg.env.n_agents),
                              o.n, o.tol.value_or(1e-9), seed);
  } else if (o.target == "dynamics") {
    rep.dynamics = audit_dynamics(quad_dynamics_problem(cfg.quad), sampler.sample, o.n,
                                  o.tol.value_or(1e-9), seed);
    rep.extra["probe"] = "g = (R_x(90 deg), 0) at hover";
    rep.extra["probe_residual"] = quad_rotation_probe(cfg.quad);
  } else if (o.target == "policy") {
    if (o.ckpt.empty()) throw ConfigError("audit policy requires --ckpt");
    const auto policy = load_policy(o.ckpt);
    rep.policy = audit_policy(*policy, sampler.sample, std::min(8, std::max(2, cfg.env.n_agents)),
                              o.n, o.tol.value_or(1e-5), seed);
  } else if (o.target == "pushforward") {
    const int k = std::clamp(o.n, 1, 8);
    std::vector<double> angles;
    for (int j = 0; j < k; ++j) angles.push_back(2.0 * std::numbers::pi * j / k);
    const PushforwardReport pf = pushforward_demo(angles, o.tol.value_or(1e-12), seed);
    rep.dynamics.evaluated = true;
    rep.dynamics.residual = pf.equivariance_residual;
    rep.dynamics.tolerance = o.tol.value_or(1e-12);
    rep.dynamics.pass = pf.equivariance_pass && pf.trajectory_deviation == 0.0;
    rep.dynamics.samples = 100 * k;
    rep.group = "C" + std::to_string(k);
    rep.sampling = "planar rotations by multiples of 2 pi / " + std::to_string(k);
    rep.extra = pf.to_json();
  } else {
    throw ConfigError("unknown audit target '" + o.target +
                      "' (expected reward, dynamics, policy, pushforward)");
  }
  const nlohmann::json j = rep.to_json();
  std::cerr << rep.table();
  std::cout << j.dump(2) << "\n";
  if (!o.out.empty()) write_json(o.out, j);
  return rep.pass() ? kExitOk : kExitFailure;
}

int run_pushforward(const Options& o) {
  const std::vector<double> angles{0.0, std::numbers::pi / 2, std::numbers::pi,
                                   3 * std::numbers::pi / 2};
  const PushforwardReport pf = pushforward_demo(angles, o.tol.value_or(1e-12), o.seed.value_or(1));
  const nlohmann::json j = pf.to_json();
  std::cout << j.dump(2) << "\n";
  if (!o.out.empty()) write_json(o.out, j);
  return pf.equivariance_pass && pf.trajectory_deviation == 0.0 ? kExitOk : kExitFailure;
}

int run_export(const Options& o) {
  if (o.ckpt.empty()) throw ConfigError("export-traj requires --ckpt");
  const ExperimentConfig cfg = experiment(o);
  const auto policy = load_policy(o.ckpt);
  const EvalResult res = evaluate_policy(cfg, *policy, 1, o.seed.value_or(cfg.train.seed), true);
  const fs::path out = o.out.empty() ? fs::path("trajectory.csv") : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out);
  write_trace_csv(csv, res.traces.front());
  if (!csv) throw Error("cannot write " + out.string());
  std::cout << to_json(res.average).dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant multi-quadrotor control: training, evaluation and symmetry audits"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Configuration file");
    sub->add_option("--override", o.overrides, "Config override key=value (repeatable)");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out", o.out, "Output directory or file");
  };

  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the mean action");
  add_common(eval);
  eval->add_option("--ckpt", o.ckpt, "Checkpoint path");
  eval->add_option("--episodes", o.episodes, "Number of episodes")->check(CLI::PositiveNumber);

  auto* audit = app.add_subcommand("audit", "Check symmetry conditions by sampling");
  add_common(audit);
  audit->add_option("target", o.target, "reward | dynamics | policy | pushforward")->required();
  audit->add_option("--group", o.group, "se3 | so3 | se2z | trans | identity");
  audit->add_option("--n", o.n, "Number of samples")->check(CLI::PositiveNumber);
  audit->add_option("--tol", o.tol, "Pass tolerance");
  audit->add_option("--ckpt", o.ckpt, "Checkpoint path (policy target)");

  auto* demo = app.add_subcommand("demo-pushforward", "Symmetry-extended planar integrator demo");
  demo->add_option("--seed", o.seed, "Random seed");
  demo->add_option("--tol", o.tol, "Pass tolerance");
  demo->add_option("--out", o.out, "Output JSON file");

  auto* exp = app.add_subcommand("export-traj", "Write one evaluation episode as CSV");
  add_common(exp);
  exp->add_option("--ckpt", o.ckpt, "Checkpoint path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(o);
    if (eval->parsed()) return run_eval(o);
    if (audit->parsed()) return run_audit(o);
    if (demo->parsed()) return run_pushforward(o);
    if (exp->parsed()) return run_export(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    if (dynamic_cast<const ShapeError*>(&e)) err["kind"] = "shape_mismatch";
    std::cerr << err.dump() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
