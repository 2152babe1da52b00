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
// Experiment wiring: configuration sections, the training loop, checkpoints
// and deterministic evaluation.

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "equiswarm/config.hpp"
#include "equiswarm/policy.hpp"
#include "equiswarm/ppo.hpp"
#include "equiswarm/quad.hpp"
#include "equiswarm/scenario.hpp"
#include "equiswarm/swarm.hpp"

namespace equiswarm {

struct ExperimentConfig {
  QuadParams quad;
  EnvConfig env;
  ScenarioConfig scenario;
  PolicyConfig policy;
  TrainConfig train;

  // Every section key any module reads.
  static std::vector<ConfigKey> known_keys();
  // Rejects unknown keys. When [policy] init_mean is absent the action mean
  // starts at the hover command.
  static ExperimentConfig from_config(const Config& cfg);
  nlohmann::json to_json() const;
};

// Reads `path` (if non-empty), applies overrides, and validates.
Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

// Raw action whose normalized thrust is the hover command.
double hover_raw_action(const QuadParams& p);

struct UpdateRecord {
  int update = 0;
  long steps = 0;
  double mean_step_reward = 0;
  double episode_reward = 0;  // mean step reward times episode length
  std::optional<double> finished_episode_return;
  double mean_distance = 0;
  int diverged = 0;
  UpdateStats stats;
  double seconds = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<UpdateRecord> history;
  std::filesystem::path last_checkpoint;
  bool interrupted = false;
  bool aborted = false;  // a non-finite update was rejected
  std::string abort_reason;
};

struct TrainOptions {
  std::filesystem::path out_dir;   // empty: no files written
  int threads = 1;
  const std::atomic<bool>* stop = nullptr;  // checked at update boundaries
  std::function<void(const UpdateRecord&)> on_update;
  // Abort the run at the first rejected update instead of continuing.
  bool stop_on_abort = true;
};

TrainResult train(const ExperimentConfig& cfg, Policy& policy, const TrainOptions& opts);

// Parameters plus a JSON sidecar with the policy configuration.
void save_policy(const std::filesystem::path& path, const Policy& policy);
std::unique_ptr<Policy> load_policy(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

struct EvalResult {
  EpisodeMetrics average;
  std::vector<EpisodeMetrics> episodes;
  std::vector<EpisodeTrace> traces;  // filled when requested
};

// Deterministic (mean-action) episodes; episode e uses seed + e.
EvalResult evaluate_policy(const ExperimentConfig& cfg, const Policy& policy, int episodes,
                           std::uint64_t seed, bool keep_traces = false);

// Threads allowed by EQUISWARM_THREADS (default: hardware concurrency).
int thread_budget();

}  // namespace equiswarm
