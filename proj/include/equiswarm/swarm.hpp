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
// Multi-agent quadrotor environment: neighborhoods, local graphs, rewards,
// collision bookkeeping, episode traces and evaluation metrics.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "equiswarm/config.hpp"
#include "equiswarm/group.hpp"
#include "equiswarm/quad.hpp"
#include "equiswarm/scenario.hpp"

namespace equiswarm {

struct SwarmState {
  std::vector<QuadState> agents;
  double time = 0.0;

  int size() const { return static_cast<int>(agents.size()); }
};

enum class NeighborMode { kNearest, kBall };

// Coefficients already multiplied by the control period where applicable.
struct RewardCoeffs {
  double c1 = 0.0;  // distance to target
  double c2 = 0.0;  // collision event
  double c3 = 0.0;  // proximity hinge
  double c4 = 0.0;  // angular rate
  double c5 = 0.0;  // control effort

  // c1 = 0.5 dt, c2 = 5, c3 = 5 dt, c4 = 0.01 dt, c5 = 0.05 dt.
  static RewardCoeffs scaled(double dt);
};

struct RewardBreakdown {
  double position = 0.0;
  double collision = 0.0;
  double stability = 0.0;
  double total = 0.0;
};

struct EnvConfig {
  int n_agents = 8;
  int k_neighbors = 7;
  NeighborMode neighbor_mode = NeighborMode::kNearest;
  double ball_radius = 2.0;  // kBall only; still capped at k_neighbors
  double d_m = 0.1;
  double d_p = 0.6;
  double success_radius = 0.25;
  double episode_seconds = 15.0;
  double init_tilt_deg = 10.0;
  RewardCoeffs coeffs = RewardCoeffs::scaled(0.01);

  static EnvConfig from_config(const Config& cfg, double dt_ctrl);
  static std::vector<ConfigKey> config_keys();
};

// K nearest other agents by position, ties broken by lower index.
std::vector<std::vector<int>> neighborhoods(const SwarmState& s, int k);
// Others within `radius`, nearest first, capped at k.
std::vector<std::vector<int>> ball_neighborhoods(const SwarmState& s, double radius, int k);

// The ego agent's complete graph over itself and its neighbors. Node 0 is the
// ego agent.
struct LocalGraph {
  int ego = 0;
  GroupElement ego_pose;
  std::vector<int> nodes;  // global agent indices, ego first
  std::vector<GroupElement> poses;
  std::vector<QuadState> states;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int edge_count() const { return node_count() * (node_count() - 1) / 2; }
  std::vector<int> neighbors() const { return {nodes.begin() + 1, nodes.end()}; }
};

LocalGraph build_local_graph(const SwarmState& s, int i, const std::vector<int>& neighbors);
LocalGraph build_local_graph(const SwarmState& s, int i, int k);

// Per-agent reward. `collision_event` is the already-debounced indicator.
// `u` is the raw action after clipping to [-1, 1].
RewardBreakdown reward(const QuadState& self, const std::vector<Vec3>& neighbor_positions,
                       const Vec4& u, const RewardCoeffs& c, double d_p, bool collision_event);

// Rewards for a joint state without room terms or contact memory: the
// collision indicator fires whenever a neighbor is closer than d_m.
std::vector<RewardBreakdown> instantaneous_rewards(const SwarmState& s,
                                                   const std::vector<Vec4>& u,
                                                   const EnvConfig& cfg);

// Charges a contact only on its first detection. An agent pair may be charged
// again once it separates beyond d_m; a wall contact once the agent is more
// than d_m inside the room.
class CollisionTracker {
 public:
  struct Events {
    std::vector<bool> agent;  // new inter-agent contact this step
    std::vector<bool> wall;   // new wall contact this step
  };

  void reset() {
    pairs_.clear();
    walls_.clear();
  }
  // `outside_room` flags agents that left the room during the step (before
  // they were clamped back).
  Events update(const SwarmState& s, const std::vector<bool>& outside_room, const Room& room,
                double d_m);

 private:
  std::set<std::pair<int, int>> pairs_;
  std::set<int> walls_;
};

struct TraceRow {
  double t = 0.0;
  int agent = 0;
  QuadState state;
  Vec4 u = Vec4::Zero();
  RewardBreakdown reward;
  bool agent_collision = false;
  bool wall_collision = false;
};

struct EpisodeTrace {
  int n_agents = 0;
  std::vector<TraceRow> rows;  // step-major, agent-minor
};

struct EpisodeMetrics {
  double mean_reward = 0.0;         // episode return per agent
  double mean_final_distance = 0.0;
  double collisions = 0.0;          // charged events per episode
  double success_rate = 0.0;
  double agent_collision_rate = 0.0;
  int episodes = 0;
};

// Throws Error on an empty trace.
EpisodeMetrics episode_metrics(const EpisodeTrace& trace, double success_radius);
// Episode-weighted average. Throws Error on an empty list.
EpisodeMetrics average_metrics(const std::vector<EpisodeMetrics>& per_episode);
nlohmann::json to_json(const EpisodeMetrics& m);

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);

struct StepResult {
  std::vector<RewardBreakdown> rewards;
  std::vector<bool> agent_collision;
  std::vector<bool> wall_collision;
  bool done = false;      // time limit reached or diverged
  bool diverged = false;
};

class SwarmEnv {
 public:
  SwarmEnv(EnvConfig env, ScenarioConfig scenario, QuadParams quad, std::uint64_t seed);

  const SwarmState& reset();
  // Raw policy outputs, one per agent; they are clipped and mapped to thrusts.
  StepResult step(const std::vector<Vec4>& raw_actions);

  const SwarmState& state() const { return state_; }
  const EnvConfig& config() const { return env_; }
  const QuadParams& quad() const { return quad_; }
  const Scenario& scenario() const { return scenario_; }
  int step_count() const { return steps_; }
  int episode_steps() const;
  std::vector<std::vector<int>> current_neighborhoods() const;
  LocalGraph local_graph(int i) const;

  // When set, every step appends rows to the trace.
  void set_recording(bool on) { recording_ = on; }
  const EpisodeTrace& trace() const { return trace_; }
  void set_aero_hook(AeroHook hook) { hook_ = std::move(hook); }

 private:
  EnvConfig env_;
  QuadParams quad_;
  Scenario scenario_;
  Room room_;
  std::mt19937_64 rng_;
  SwarmState state_;
  CollisionTracker tracker_;
  AeroHook hook_;
  EpisodeTrace trace_;
  bool recording_ = false;
  int steps_ = 0;
};

}  // namespace equiswarm
