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

#include "equiswarm/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "equiswarm/errors.hpp"

namespace equiswarm {

RewardCoeffs RewardCoeffs::scaled(double dt) {
  return {0.5 * dt, 5.0, 5.0 * dt, 0.01 * dt, 0.05 * dt};
}

EnvConfig EnvConfig::from_config(const Config& cfg, double dt_ctrl) {
  EnvConfig e;
  e.n_agents = cfg.get("env", "n_agents", e.n_agents);
  e.k_neighbors = cfg.get("env", "k_neighbors", e.k_neighbors);
  const auto mode = cfg.get<std::string>("env", "neighbor_mode", "nearest");
  if (mode == "nearest") {
    e.neighbor_mode = NeighborMode::kNearest;
  } else if (mode == "ball") {
    e.neighbor_mode = NeighborMode::kBall;
  } else {
    throw ConfigError("[env] neighbor_mode: expected 'nearest' or 'ball', got '" + mode + "'");
  }
  e.ball_radius = cfg.get("env", "ball_radius", e.ball_radius);
  e.d_m = cfg.get("env", "d_m", e.d_m);
  e.d_p = cfg.get("env", "d_p", e.d_p);
  e.success_radius = cfg.get("env", "success_radius", e.success_radius);
  e.episode_seconds = cfg.get("env", "episode_seconds", e.episode_seconds);
  e.init_tilt_deg = cfg.get("env", "init_tilt_deg", e.init_tilt_deg);
  e.coeffs = RewardCoeffs::scaled(dt_ctrl);
  e.coeffs.c1 = cfg.get("reward", "c1", e.coeffs.c1);
  e.coeffs.c2 = cfg.get("reward", "c2", e.coeffs.c2);
  e.coeffs.c3 = cfg.get("reward", "c3", e.coeffs.c3);
  e.coeffs.c4 = cfg.get("reward", "c4", e.coeffs.c4);
  e.coeffs.c5 = cfg.get("reward", "c5", e.coeffs.c5);
  if (e.n_agents < 1) throw ConfigError("[env] n_agents must be >= 1");
  if (e.k_neighbors < 0) throw ConfigError("[env] k_neighbors must be >= 0");
  if (!(e.d_m > 0.0) || !(e.d_p > 0.0)) throw ConfigError("[env] d_m and d_p must be positive");
  if (!(e.episode_seconds > 0.0)) throw ConfigError("[env] episode_seconds must be positive");
  return e;
}

std::vector<ConfigKey> EnvConfig::config_keys() {
  std::vector<ConfigKey> keys;
  for (const char* k : {"n_agents", "k_neighbors", "neighbor_mode", "ball_radius", "d_m", "d_p",
                        "success_radius", "episode_seconds", "init_tilt_deg"}) {
    keys.push_back({"env", k});
  }
  for (const char* k : {"c1", "c2", "c3", "c4", "c5"}) keys.push_back({"reward", k});
  return keys;
}

namespace {

// Other agents sorted by (distance, index).
std::vector<int> sorted_others(const SwarmState& s, int i) {
  std::vector<std::pair<double, int>> d;
  for (int j = 0; j < s.size(); ++j) {
    if (j == i) continue;
    d.push_back({(s.agents[static_cast<std::size_t>(j)].position -
                  s.agents[static_cast<std::size_t>(i)].position)
                     .squaredNorm(),
                 j});
  }
  std::sort(d.begin(), d.end());
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& [dist, j] : d) out.push_back(j);
  return out;
}

}  // namespace

std::vector<std::vector<int>> neighborhoods(const SwarmState& s, int k) {
  std::vector<std::vector<int>> out;
  for (int i = 0; i < s.size(); ++i) {
    auto others = sorted_others(s, i);
    if (static_cast<int>(others.size()) > k) others.resize(static_cast<std::size_t>(k));
    out.push_back(std::move(others));
  }
  return out;
}

std::vector<std::vector<int>> ball_neighborhoods(const SwarmState& s, double radius, int k) {
  std::vector<std::vector<int>> out;
  for (int i = 0; i < s.size(); ++i) {
    std::vector<int> keep;
    for (int j : sorted_others(s, i)) {
      const double d = (s.agents[static_cast<std::size_t>(j)].position -
                        s.agents[static_cast<std::size_t>(i)].position)
                           .norm();
      if (d > radius || static_cast<int>(keep.size()) >= k) break;
      keep.push_back(j);
    }
    out.push_back(std::move(keep));
  }
  return out;
}

LocalGraph build_local_graph(const SwarmState& s, int i, const std::vector<int>& neighbors) {
  if (i < 0 || i >= s.size()) throw Error("build_local_graph: agent index out of range");
  LocalGraph g;
  g.ego = i;
  g.nodes.push_back(i);
  g.nodes.insert(g.nodes.end(), neighbors.begin(), neighbors.end());
  for (int j : g.nodes) {
    const QuadState& st = s.agents[static_cast<std::size_t>(j)];
    g.states.push_back(st);
    g.poses.push_back(GroupElement::pose_of(st));
  }
  g.ego_pose = g.poses.front();
  return g;
}

LocalGraph build_local_graph(const SwarmState& s, int i, int k) {
  auto others = sorted_others(s, i);
  if (static_cast<int>(others.size()) > k) others.resize(static_cast<std::size_t>(k));
  return build_local_graph(s, i, others);
}

RewardBreakdown reward(const QuadState& self, const std::vector<Vec3>& neighbor_positions,
                       const Vec4& u, const RewardCoeffs& c, double d_p, bool collision_event) {
  RewardBreakdown r;
  r.position = -c.c1 * (self.position - self.target).norm();
  double proximity = 0.0;
  for (const Vec3& p : neighbor_positions) {
    proximity += std::max(1.0 - (self.position - p).norm() / d_p, 0.0);
  }
  r.collision = -c.c2 * (collision_event ? 1.0 : 0.0) - c.c3 * proximity;
  r.stability = -c.c4 * self.body_rate.norm() - c.c5 * u.norm();
  r.total = r.position + r.collision + r.stability;
  return r;
}

std::vector<RewardBreakdown> instantaneous_rewards(const SwarmState& s,
                                                   const std::vector<Vec4>& u,
                                                   const EnvConfig& cfg) {
  const auto nbrs = cfg.neighbor_mode == NeighborMode::kNearest
                        ? neighborhoods(s, cfg.k_neighbors)
                        : ball_neighborhoods(s, cfg.ball_radius, cfg.k_neighbors);
  std::vector<RewardBreakdown> out;
  for (int i = 0; i < s.size(); ++i) {
    const QuadState& me = s.agents[static_cast<std::size_t>(i)];
    std::vector<Vec3> pos;
    bool contact = false;
    for (int j : nbrs[static_cast<std::size_t>(i)]) {
      pos.push_back(s.agents[static_cast<std::size_t>(j)].position);
      contact = contact || (pos.back() - me.position).norm() < cfg.d_m;
    }
    const Vec4 clipped = u[static_cast<std::size_t>(i)].cwiseMax(-1.0).cwiseMin(1.0);
    out.push_back(reward(me, pos, clipped, cfg.coeffs, cfg.d_p, contact));
  }
  return out;
}

CollisionTracker::Events CollisionTracker::update(const SwarmState& s,
                                                  const std::vector<bool>& outside_room,
                                                  const Room& room, double d_m) {
  const int n = s.size();
  Events ev{std::vector<bool>(static_cast<std::size_t>(n), false),
            std::vector<bool>(static_cast<std::size_t>(n), false)};
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (s.agents[static_cast<std::size_t>(i)].position -
                        s.agents[static_cast<std::size_t>(j)].position)
                           .norm();
      const auto key = std::make_pair(i, j);
      if (d < d_m) {
        if (pairs_.insert(key).second) {
          ev.agent[static_cast<std::size_t>(i)] = true;
          ev.agent[static_cast<std::size_t>(j)] = true;
        }
      } else {
        pairs_.erase(key);
      }
    }
    if (outside_room[static_cast<std::size_t>(i)]) {
      if (walls_.insert(i).second) ev.wall[static_cast<std::size_t>(i)] = true;
    } else if (room.clearance(s.agents[static_cast<std::size_t>(i)].position) > d_m) {
      walls_.erase(i);
    }
  }
  return ev;
}

EpisodeMetrics episode_metrics(const EpisodeTrace& trace, double success_radius) {
  if (trace.rows.empty() || trace.n_agents < 1) throw Error("episode_metrics: empty trace");
  const auto n = static_cast<std::size_t>(trace.n_agents);
  std::vector<double> ret(n, 0.0);
  std::vector<int> agent_hits(n, 0), wall_hits(n, 0);
  std::vector<double> final_dist(n, 0.0);
  for (const TraceRow& r : trace.rows) {
    const auto a = static_cast<std::size_t>(r.agent);
    ret[a] += r.reward.total;
    agent_hits[a] += r.agent_collision;
    wall_hits[a] += r.wall_collision;
    final_dist[a] = (r.state.position - r.state.target).norm();
  }
  EpisodeMetrics m;
  m.episodes = 1;
  int successes = 0, colliders = 0;
  double events = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    m.mean_reward += ret[a];
    m.mean_final_distance += final_dist[a];
    events += agent_hits[a] + wall_hits[a];
    if (final_dist[a] <= success_radius && agent_hits[a] + wall_hits[a] == 0) ++successes;
    if (agent_hits[a] > 0) ++colliders;
  }
  const double nd = static_cast<double>(n);
  m.mean_reward /= nd;
  m.mean_final_distance /= nd;
  m.collisions = events;
  m.success_rate = successes / nd;
  m.agent_collision_rate = colliders / nd;
  return m;
}

EpisodeMetrics average_metrics(const std::vector<EpisodeMetrics>& per_episode) {
  if (per_episode.empty()) throw Error("average_metrics: no episodes");
  EpisodeMetrics m;
  double w = 0.0;
  for (const auto& e : per_episode) {
    const double k = e.episodes;
    m.mean_reward += k * e.mean_reward;
    m.mean_final_distance += k * e.mean_final_distance;
    m.collisions += k * e.collisions;
    m.success_rate += k * e.success_rate;
    m.agent_collision_rate += k * e.agent_collision_rate;
    m.episodes += e.episodes;
    w += k;
  }
  m.mean_reward /= w;
  m.mean_final_distance /= w;
  m.collisions /= w;
  m.success_rate /= w;
  m.agent_collision_rate /= w;
  return m;
}

nlohmann::json to_json(const EpisodeMetrics& m) {
  return {{"mean_reward", m.mean_reward},
          {"mean_final_distance", m.mean_final_distance},
          {"collisions_per_episode", m.collisions},
          {"success_rate", m.success_rate},
          {"agent_collision_rate", m.agent_collision_rate},
          {"episodes", m.episodes}};
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  out << "t,agent,x,y,z,vx,vy,vz";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << ",R" << r << c;
  }
  out << ",wx,wy,wz,tx,ty,tz,u0,u1,u2,u3,r_position,r_collision,r_stability,r_total,"
         "agent_collision,wall_collision\n";
  out.precision(17);
  for (const TraceRow& row : trace.rows) {
    const QuadState& s = row.state;
    out << row.t << ',' << row.agent;
    for (int k = 0; k < 3; ++k) out << ',' << s.position[k];
    for (int k = 0; k < 3; ++k) out << ',' << s.velocity[k];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ',' << s.attitude(r, c);
    }
    for (int k = 0; k < 3; ++k) out << ',' << s.body_rate[k];
    for (int k = 0; k < 3; ++k) out << ',' << s.target[k];
    for (int k = 0; k < 4; ++k) out << ',' << row.u[k];
    out << ',' << row.reward.position << ',' << row.reward.collision << ','
        << row.reward.stability << ',' << row.reward.total << ',' << int(row.agent_collision)
        << ',' << int(row.wall_collision) << '\n';
  }
}

SwarmEnv::SwarmEnv(EnvConfig env, ScenarioConfig scenario, QuadParams quad, std::uint64_t seed)
    : env_(env),
      quad_(quad),
      scenario_(std::move(scenario), env.n_agents, seed),
      room_(scenario_.config().room()),
      rng_(seed) {
  quad_.validate();
  reset();
}

int SwarmEnv::episode_steps() const {
  return static_cast<int>(std::lround(env_.episode_seconds / quad_.dt_ctrl));
}

const SwarmState& SwarmEnv::reset() {
  state_ = SwarmState{};
  state_.agents.resize(static_cast<std::size_t>(env_.n_agents));
  tracker_.reset();
  trace_ = EpisodeTrace{env_.n_agents, {}};
  steps_ = 0;

  const double margin = std::min(0.5, 0.25 * (room_.hi - room_.lo).minCoeff());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double max_tilt = env_.init_tilt_deg * std::numbers::pi / 180.0;
  const auto targets = scenario_.targets(0.0);
  for (int i = 0; i < env_.n_agents; ++i) {
    QuadState& q = state_.agents[static_cast<std::size_t>(i)];
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        p[k] = room_.lo[k] + margin + unit(rng_) * (room_.hi[k] - room_.lo[k] - 2 * margin);
      }
      placed = true;
      for (int j = 0; j < i; ++j) {
        if ((state_.agents[static_cast<std::size_t>(j)].position - p).norm() < env_.d_p) {
          placed = false;
          break;
        }
      }
      q.position = p;
    }
    if (!placed) {
      throw ConfigError("[env] cannot place " + std::to_string(env_.n_agents) +
                        " agents with separation d_p in the room");
    }
    const double yaw = 2.0 * std::numbers::pi * unit(rng_);
    const double heading = 2.0 * std::numbers::pi * unit(rng_);
    const double tilt = max_tilt * unit(rng_);
    q.attitude = axis_angle(Vec3(std::cos(heading), std::sin(heading), 0.0), tilt) * rot_z(yaw);
    q.velocity.setZero();
    q.body_rate.setZero();
    q.target = targets[static_cast<std::size_t>(i)];
  }
  return state_;
}

std::vector<std::vector<int>> SwarmEnv::current_neighborhoods() const {
  return env_.neighbor_mode == NeighborMode::kNearest
             ? neighborhoods(state_, env_.k_neighbors)
             : ball_neighborhoods(state_, env_.ball_radius, env_.k_neighbors);
}

LocalGraph SwarmEnv::local_graph(int i) const {
  return build_local_graph(state_, i, current_neighborhoods()[static_cast<std::size_t>(i)]);
}

StepResult SwarmEnv::step(const std::vector<Vec4>& raw_actions) {
  const auto n = static_cast<std::size_t>(env_.n_agents);
  if (raw_actions.size() != n) throw ShapeError("SwarmEnv::step: one action per agent required");
  StepResult res;
  std::vector<bool> outside(n, false);
  std::vector<Vec4> clipped(n);
  try {
    for (std::size_t i = 0; i < n; ++i) {
      clipped[i] = raw_actions[i].cwiseMax(-1.0).cwiseMin(1.0);
      QuadState next = equiswarm::step(state_.agents[i], normalize_action(raw_actions[i]), quad_,
                                       hook_);
      if (!room_.contains(next.position)) {
        outside[i] = true;
        const Vec3 inside = room_.clamp(next.position);
        for (int k = 0; k < 3; ++k) {
          if (inside[k] != next.position[k]) next.velocity[k] = 0.0;
        }
        next.position = inside;
      }
      state_.agents[i] = next;
    }
  } catch (const DivergenceError&) {
    res.diverged = true;
    res.done = true;
    res.rewards.assign(n, RewardBreakdown{});
    res.agent_collision.assign(n, false);
    res.wall_collision.assign(n, false);
    return res;
  }
  ++steps_;
  state_.time = steps_ * quad_.dt_ctrl;
  const auto targets = scenario_.targets(state_.time);
  for (std::size_t i = 0; i < n; ++i) state_.agents[i].target = targets[i];

  const auto events = tracker_.update(state_, outside, room_, env_.d_m);
  res.agent_collision = events.agent;
  res.wall_collision = events.wall;
  const auto nbrs = current_neighborhoods();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Vec3> pos;
    for (int j : nbrs[i]) pos.push_back(state_.agents[static_cast<std::size_t>(j)].position);
    res.rewards.push_back(reward(state_.agents[i], pos, clipped[i], env_.coeffs, env_.d_p,
                                 events.agent[i] || events.wall[i]));
    if (recording_) {
      trace_.rows.push_back({state_.time, static_cast<int>(i), state_.agents[i], clipped[i],
                             res.rewards.back(), events.agent[i], events.wall[i]});
    }
  }
  res.done = steps_ >= episode_steps();
  return res;
}

}  // namespace equiswarm
