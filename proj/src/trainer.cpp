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

#include "equiswarm/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "equiswarm/checkpoint.hpp"
#include "equiswarm/errors.hpp"

namespace equiswarm {

std::vector<ConfigKey> ExperimentConfig::known_keys() {
  std::vector<ConfigKey> keys;
  for (auto part : {QuadParams::config_keys(), EnvConfig::config_keys(),
                    ScenarioConfig::config_keys(), PolicyConfig::config_keys(),
                    TrainConfig::config_keys()}) {
    keys.insert(keys.end(), part.begin(), part.end());
  }
  return keys;
}

double hover_raw_action(const QuadParams& p) { return 2.0 * p.hover_action() - 1.0; }

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  cfg.validate_keys(known_keys());
  ExperimentConfig e;
  e.quad = QuadParams::from_config(cfg);
  e.env = EnvConfig::from_config(cfg, e.quad.dt_ctrl);
  e.scenario = ScenarioConfig::from_config(cfg);
  e.policy = PolicyConfig::from_config(cfg);
  if (!cfg.has("policy", "init_mean")) e.policy.init_mean = hover_raw_action(e.quad);
  e.train = TrainConfig::from_config(cfg);
  return e;
}

nlohmann::json ExperimentConfig::to_json() const {
  const auto& t = train;
  nlohmann::json j;
  j["quad"] = {{"mass", quad.mass},
               {"arm_length", quad.arm_length},
               {"max_thrust", quad.max_thrust},
               {"yaw_torque_coeff", quad.yaw_torque_coeff},
               {"inertia_xx", quad.inertia(0, 0)},
               {"inertia_yy", quad.inertia(1, 1)},
               {"inertia_zz", quad.inertia(2, 2)},
               {"dt_phys", quad.dt_phys},
               {"dt_ctrl", quad.dt_ctrl}};
  j["env"] = {{"n_agents", env.n_agents},
              {"k_neighbors", env.k_neighbors},
              {"neighbor_mode", env.neighbor_mode == NeighborMode::kNearest ? "nearest" : "ball"},
              {"ball_radius", env.ball_radius},
              {"d_m", env.d_m},
              {"d_p", env.d_p},
              {"success_radius", env.success_radius},
              {"episode_seconds", env.episode_seconds},
              {"init_tilt_deg", env.init_tilt_deg}};
  j["reward"] = {{"c1", env.coeffs.c1}, {"c2", env.coeffs.c2}, {"c3", env.coeffs.c3},
                 {"c4", env.coeffs.c4}, {"c5", env.coeffs.c5}};
  j["scenario"] = {{"kind", to_string(scenario.kind)},
                   {"formation", to_string(scenario.formation)},
                   {"room_size", scenario.room_size},
                   {"formation_scale", scenario.formation_scale},
                   {"period", scenario.period},
                   {"wall_margin", scenario.wall_margin}};
  j["policy"] = equiswarm::to_json(policy);
  j["train"] = {{"lr", t.lr},
                {"gamma", t.gamma},
                {"lambda", t.lambda},
                {"clip", t.clip},
                {"rollout_length", t.rollout_length},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"max_grad_norm", t.max_grad_norm},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"value_coef", t.value_coef},
                {"entropy_coef", t.entropy_coef},
                {"workers", t.workers},
                {"total_steps", t.total_steps},
                {"seed", t.seed},
                {"checkpoint_every", t.checkpoint_every},
                {"normalize_returns", t.normalize_returns}};
  return j;
}

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : Config::load(path);
  const auto keys = ExperimentConfig::known_keys();
  for (const auto& o : overrides) cfg.apply_override(o, keys);
  cfg.validate_keys(keys);
  return cfg;
}

nlohmann::json UpdateRecord::to_json() const {
  nlohmann::json j = {{"update", update},
                      {"steps", steps},
                      {"mean_step_reward", mean_step_reward},
                      {"episode_reward", episode_reward},
                      {"mean_distance", mean_distance},
                      {"diverged_episodes", diverged},
                      {"policy_loss", stats.policy_loss},
                      {"value_loss", stats.value_loss},
                      {"entropy", stats.entropy},
                      {"clip_fraction", stats.clip_fraction},
                      {"grad_norm", stats.grad_norm},
                      {"aborted", stats.aborted},
                      {"seconds", seconds}};
  j["finished_episode_return"] =
      finished_episode_return ? nlohmann::json(*finished_episode_return) : nlohmann::json();
  return j;
}

int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("EQUISWARM_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = cap;
    } catch (const std::exception&) {
      throw ConfigError(std::string("EQUISWARM_THREADS: not an integer: ") + env);
    }
  }
  return n;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".json";
  return p;
}

void save_policy(const std::filesystem::path& path, const Policy& policy) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  write_tensors(tmp, snapshot(policy.params()));
  std::filesystem::rename(tmp, path);
  std::ofstream side(sidecar_path(path));
  side << to_json(policy.config()).dump(2) << "\n";
  if (!side) throw Error("cannot write " + sidecar_path(path).string());
}

std::unique_ptr<Policy> load_policy(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  const auto side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw ConfigError("checkpoint sidecar not found: " + side.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed sidecar " + side.string() + ": " + e.what());
  }
  auto policy = std::make_unique<Policy>(policy_config_from_json(j), 0);
  restore(read_tensors(path), policy->params());
  return policy;
}

TrainResult train(const ExperimentConfig& cfg, Policy& policy, const TrainOptions& opts) {
  const TrainConfig& tc = cfg.train;
  TrainResult result;
  std::ofstream metrics;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    metrics.open(opts.out_dir / "metrics.jsonl");
    if (!metrics) throw Error("cannot write " + (opts.out_dir / "metrics.jsonl").string());
  }

  std::vector<Worker> workers;
  for (int w = 0; w < tc.workers; ++w) {
    const std::uint64_t seed = tc.seed + static_cast<std::uint64_t>(w);
    workers.push_back({std::make_unique<SwarmEnv>(cfg.env, cfg.scenario, cfg.quad, seed),
                       std::mt19937_64(seed ^ 0x9E3779B97F4A7C15ULL), {}});
  }
  Adam adam(tc.adam());
  std::mt19937_64 shuffle_rng(tc.seed * 7919 + 17);
  RolloutBuffer buffer;
  ReturnScaler scaler(tc.gamma);
  const long per_update = static_cast<long>(tc.workers) * cfg.env.n_agents * tc.rollout_length;
  const int updates = static_cast<int>((tc.total_steps + per_update - 1) / per_update);
  const int episode_steps = workers.front().env->episode_steps();
  long steps = 0;

  auto checkpoint = [&](const std::string& name) {
    if (opts.out_dir.empty()) return;
    const auto path = opts.out_dir / name;
    save_policy(path, policy);
    result.last_checkpoint = path;
  };

  for (int u = 1; u <= updates; ++u) {
    if (opts.stop && opts.stop->load()) {
      result.interrupted = true;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    collect(policy, workers, tc.rollout_length, buffer, false, opts.threads);
    steps += per_update;

    UpdateRecord rec;
    rec.update = u;
    rec.steps = steps;
    double rsum = 0.0, dsum = 0.0;
    for (std::size_t i = 0; i < buffer.capacity(); ++i) {
      rsum += buffer.rewards[i];
      dsum += buffer.distances[i];
    }
    rec.mean_step_reward = rsum / static_cast<double>(buffer.capacity());
    rec.episode_reward = rec.mean_step_reward * episode_steps;
    rec.mean_distance = dsum / static_cast<double>(buffer.capacity());
    rec.diverged = buffer.diverged;
    if (!buffer.finished_returns.empty()) {
      double s = 0.0;
      for (double r : buffer.finished_returns) s += r;
      rec.finished_episode_return = s / static_cast<double>(buffer.finished_returns.size());
    }

    if (tc.normalize_returns) scaler.scale(buffer);
    buffer.compute_advantages(tc.gamma, tc.lambda);
    if (!buffer.all_finite()) {
      rec.stats.aborted = true;
      rec.stats.reason = "non-finite values in rollout buffer";
    } else {
      const PpoData data = make_ppo_data(buffer);
      rec.stats = ppo_update(policy.params(), adam, data, policy_forward_fn(policy, buffer), tc,
                             shuffle_rng);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (metrics.is_open()) metrics << rec.to_json().dump() << "\n" << std::flush;
    if (opts.on_update) opts.on_update(rec);
    if (rec.stats.aborted) {
      result.aborted = true;
      result.abort_reason = rec.stats.reason;
      if (opts.stop_on_abort) break;
    }
    if (u % tc.checkpoint_every == 0) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(5) << std::setfill('0') << u << ".bin";
      checkpoint(name.str());
    }
  }
  // After a rejected update the parameters were restored, so they are the last good ones.
  checkpoint(result.aborted ? "checkpoint_last_good.bin" : "checkpoint_final.bin");
  return result;
}

EvalResult evaluate_policy(const ExperimentConfig& cfg, const Policy& policy, int episodes,
                           std::uint64_t seed, bool keep_traces) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  EvalResult res;
  for (int e = 0; e < episodes; ++e) {
    SwarmEnv env(cfg.env, cfg.scenario, cfg.quad, seed + static_cast<std::uint64_t>(e));
    env.set_recording(true);
    const int n = cfg.env.n_agents;
    for (bool done = false; !done;) {
      std::vector<LocalGraph> graphs;
      for (int i = 0; i < n; ++i) graphs.push_back(env.local_graph(i));
      const Tensor mean = evaluate(policy, graphs).mean;
      std::vector<Vec4> actions(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        actions[static_cast<std::size_t>(i)] =
            Vec4(mean.at(i, 0), mean.at(i, 1), mean.at(i, 2), mean.at(i, 3));
      }
      const StepResult r = env.step(actions);
      if (r.diverged) throw DivergenceError("evaluation episode diverged");
      done = r.done;
    }
    res.episodes.push_back(episode_metrics(env.trace(), cfg.env.success_radius));
    if (keep_traces) res.traces.push_back(env.trace());
  }
  res.average = average_metrics(res.episodes);
  return res;
}

}  // namespace equiswarm
