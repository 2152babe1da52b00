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
// Target generation for the swarm tasks. Targets are a pure function of
// (seed, time), so environments can be replayed exactly.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "equiswarm/config.hpp"
#include "equiswarm/state.hpp"

namespace equiswarm {

enum class ScenarioKind {
  kStaticSameGoal,
  kStaticDifferentGoals,
  kDynamicSame,
  kDynamicDifferent,
  kSwapGoals,
  kSwarmVsSwarm,
  kPursuitLissajous,
  kPursuitBezier,
};

enum class Formation { kCircle, kGrid, kSphere, kCylinder, kCube, kPoint, kRandom };

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);
Formation parse_formation(const std::string& name);
std::string to_string(Formation f);

// Axis-aligned box [-size/2, size/2]^2 x [0, size].
struct Room {
  Vec3 lo = Vec3(-5.0, -5.0, 0.0);
  Vec3 hi = Vec3(5.0, 5.0, 10.0);

  static Room cube(double size) {
    return {Vec3(-size / 2, -size / 2, 0.0), Vec3(size / 2, size / 2, size)};
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Vec3 clamp(const Vec3& p, double margin = 0.0) const;
  // Distance to the nearest wall; negative outside.
  double clearance(const Vec3& p) const {
    return std::min((p - lo).minCoeff(), (hi - p).minCoeff());
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
};

struct LissajousParams {
  double amp_x = 1.5, amp_y = 1.5, amp_z = 0.5;
  double freq_x = 1.0, freq_y = 2.0, freq_z = 1.0;  // rad/s
  double phase = 1.5707963267948966;
  double z0 = 2.0;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kStaticDifferentGoals;
  Formation formation = Formation::kRandom;
  double room_size = 10.0;
  double formation_scale = 1.0;  // radius or half-extent of a formation, m
  double period = 5.0;           // regeneration / swap / segment period, s
  double wall_margin = 0.5;      // targets stay this far inside the walls
  LissajousParams lissajous;

  Room room() const { return Room::cube(room_size); }
  static ScenarioConfig from_config(const Config& cfg);
  static std::vector<ConfigKey> config_keys();
};

// n points of `f` around the origin at the given scale. kRandom is invalid here.
std::vector<Vec3> formation_points(Formation f, int n, double scale);

Vec3 lissajous_point(const LissajousParams& p, double t);

class Scenario {
 public:
  Scenario(ScenarioConfig cfg, int n_agents, std::uint64_t seed);

  // Per-agent targets at time t; always inside the room margin.
  std::vector<Vec3> targets(double t) const;

  const ScenarioConfig& config() const { return cfg_; }
  int agent_count() const { return n_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<Vec3> formation_targets(std::uint64_t epoch, bool shared_goal) const;
  Vec3 bezier_point(double t) const;
  double margin() const;

  ScenarioConfig cfg_;
  int n_;
  std::uint64_t seed_;
};

}  // namespace equiswarm
