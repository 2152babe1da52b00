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

#include "equiswarm/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "equiswarm/errors.hpp"

namespace equiswarm {
namespace {

constexpr std::array<std::pair<ScenarioKind, const char*>, 8> kKindNames{{
    {ScenarioKind::kStaticSameGoal, "static-same-goal"},
    {ScenarioKind::kStaticDifferentGoals, "static-different-goals"},
    {ScenarioKind::kDynamicSame, "dynamic-same"},
    {ScenarioKind::kDynamicDifferent, "dynamic-different"},
    {ScenarioKind::kSwapGoals, "swap-goals"},
    {ScenarioKind::kSwarmVsSwarm, "swarm-vs-swarm"},
    {ScenarioKind::kPursuitLissajous, "pursuit-lissajous"},
    {ScenarioKind::kPursuitBezier, "pursuit-bezier"},
}};

constexpr std::array<std::pair<Formation, const char*>, 7> kFormationNames{{
    {Formation::kCircle, "circle"},
    {Formation::kGrid, "grid"},
    {Formation::kSphere, "sphere"},
    {Formation::kCylinder, "cylinder"},
    {Formation::kCube, "cube"},
    {Formation::kPoint, "point"},
    {Formation::kRandom, "random"},
}};

// Independent stream per (seed, purpose, index).
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Vec3 uniform_in(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 p;
  for (int k = 0; k < 3; ++k) p[k] = lo[k] + u(rng) * (hi[k] - lo[k]);
  return p;
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  throw ConfigError("[scenario] kind: unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

Formation parse_formation(const std::string& name) {
  for (const auto& [f, n] : kFormationNames) {
    if (name == n) return f;
  }
  throw ConfigError("[scenario] formation: unknown formation '" + name + "'");
}

std::string to_string(Formation f) {
  for (const auto& [k, n] : kFormationNames) {
    if (k == f) return n;
  }
  return "unknown";
}

Vec3 Room::clamp(const Vec3& p, double margin) const {
  Vec3 out;
  for (int k = 0; k < 3; ++k) {
    const double m = std::min(margin, 0.5 * (hi[k] - lo[k]));
    out[k] = std::clamp(p[k], lo[k] + m, hi[k] - m);
  }
  return out;
}

ScenarioConfig ScenarioConfig::from_config(const Config& cfg) {
  ScenarioConfig c;
  c.kind = parse_scenario_kind(cfg.get<std::string>("scenario", "kind", to_string(c.kind)));
  c.formation = parse_formation(cfg.get<std::string>("scenario", "formation", to_string(c.formation)));
  c.room_size = cfg.get("scenario", "room_size", c.room_size);
  c.formation_scale = cfg.get("scenario", "formation_scale", c.formation_scale);
  c.period = cfg.get("scenario", "period", c.period);
  c.wall_margin = cfg.get("scenario", "wall_margin", c.wall_margin);
  auto& l = c.lissajous;
  l.amp_x = cfg.get("scenario", "lissajous_amp_x", l.amp_x);
  l.amp_y = cfg.get("scenario", "lissajous_amp_y", l.amp_y);
  l.amp_z = cfg.get("scenario", "lissajous_amp_z", l.amp_z);
  l.freq_x = cfg.get("scenario", "lissajous_freq_x", l.freq_x);
  l.freq_y = cfg.get("scenario", "lissajous_freq_y", l.freq_y);
  l.freq_z = cfg.get("scenario", "lissajous_freq_z", l.freq_z);
  l.phase = cfg.get("scenario", "lissajous_phase", l.phase);
  l.z0 = cfg.get("scenario", "lissajous_z0", l.z0);
  if (!(c.room_size > 0.0)) throw ConfigError("[scenario] room_size must be positive");
  if (!(c.period > 0.0)) throw ConfigError("[scenario] period must be positive");
  if (c.formation_scale < 0.0) throw ConfigError("[scenario] formation_scale must be >= 0");
  return c;
}

std::vector<ConfigKey> ScenarioConfig::config_keys() {
  std::vector<ConfigKey> keys;
  for (const char* k :
       {"kind", "formation", "room_size", "formation_scale", "period", "wall_margin",
        "lissajous_amp_x", "lissajous_amp_y", "lissajous_amp_z", "lissajous_freq_x",
        "lissajous_freq_y", "lissajous_freq_z", "lissajous_phase", "lissajous_z0"}) {
    keys.push_back({"scenario", k});
  }
  return keys;
}

std::vector<Vec3> formation_points(Formation f, int n, double scale) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  const double two_pi = 2.0 * std::numbers::pi;
  switch (f) {
    case Formation::kCircle:
      for (int i = 0; i < n; ++i) {
        const double a = two_pi * i / n;
        pts.emplace_back(scale * std::cos(a), scale * std::sin(a), 0.0);
      }
      break;
    case Formation::kGrid: {
      const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
      const double step = side > 1 ? 2.0 * scale / (side - 1) : 0.0;
      for (int i = 0; i < n; ++i) {
        pts.emplace_back(-scale * (side > 1) + step * (i % side),
                         -scale * (side > 1) + step * (i / side), 0.0);
      }
      break;
    }
    case Formation::kSphere: {
      // Fibonacci lattice.
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        const double z = n > 1 ? 1.0 - 2.0 * (i + 0.5) / n : 0.0;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        pts.emplace_back(scale * r * std::cos(golden * i), scale * r * std::sin(golden * i),
                         scale * z);
      }
      break;
    }
    case Formation::kCylinder: {
      const int layers = n >= 6 ? 2 : 1;
      const int per = (n + layers - 1) / layers;
      for (int i = 0; i < n; ++i) {
        const int layer = i / per;
        const double a = two_pi * (i % per) / per;
        const double z = layers > 1 ? scale * (layer == 0 ? -0.5 : 0.5) : 0.0;
        pts.emplace_back(scale * std::cos(a), scale * std::sin(a), z);
      }
      break;
    }
    case Formation::kCube: {
      const int side = std::max(2, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n)))));
      const double step = 2.0 * scale / (side - 1);
      for (int i = 0; i < n; ++i) {
        pts.emplace_back(-scale + step * (i % side), -scale + step * ((i / side) % side),
                         -scale + step * (i / (side * side)));
      }
      break;
    }
    case Formation::kPoint:
      pts.assign(static_cast<std::size_t>(n), Vec3::Zero());
      break;
    case Formation::kRandom:
      throw ConfigError("formation_points: 'random' must be resolved to a concrete formation");
  }
  return pts;
}

Vec3 lissajous_point(const LissajousParams& p, double t) {
  return {p.amp_x * std::sin(p.freq_x * t + p.phase), p.amp_y * std::sin(p.freq_y * t),
          p.amp_z * std::sin(p.freq_z * t) + p.z0};
}

Scenario::Scenario(ScenarioConfig cfg, int n_agents, std::uint64_t seed)
    : cfg_(std::move(cfg)), n_(n_agents), seed_(seed) {
  if (n_agents < 1) throw ConfigError("scenario needs at least one agent");
}

double Scenario::margin() const { return std::min(cfg_.wall_margin, 0.25 * cfg_.room_size); }

std::vector<Vec3> Scenario::formation_targets(std::uint64_t epoch, bool shared_goal) const {
  auto rng = stream(seed_, 1, epoch);
  Formation f = cfg_.formation;
  if (f == Formation::kRandom) {
    std::uniform_int_distribution<int> pick(0, 5);
    f = static_cast<Formation>(pick(rng));
  }
  const Room room = cfg_.room();
  const double m = margin() + cfg_.formation_scale;
  Vec3 lo = room.lo + Vec3::Constant(m);
  Vec3 hi = room.hi - Vec3::Constant(m);
  for (int k = 0; k < 3; ++k) {
    if (lo[k] > hi[k]) lo[k] = hi[k] = room.center()[k];
  }
  const Vec3 center = uniform_in(rng, lo, hi);
  std::vector<Vec3> out;
  if (shared_goal) {
    out.assign(static_cast<std::size_t>(n_), room.clamp(center, margin()));
    return out;
  }
  for (const Vec3& p : formation_points(f, n_, cfg_.formation_scale)) {
    out.push_back(room.clamp(center + p, margin()));
  }
  return out;
}

Vec3 Scenario::bezier_point(double t) const {
  // Composite cubic with C1 joins: each segment lasts one period.
  const Room room = cfg_.room();
  const Vec3 lo = room.lo + Vec3::Constant(margin());
  const Vec3 hi = room.hi - Vec3::Constant(margin());
  const auto segment = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / cfg_.period)));
  auto rng = stream(seed_, 2, 0);
  std::array<Vec3, 4> c{uniform_in(rng, lo, hi), uniform_in(rng, lo, hi),
                        uniform_in(rng, lo, hi), uniform_in(rng, lo, hi)};
  for (std::uint64_t s = 0; s < segment; ++s) {
    const Vec3 p0 = c[3];
    const Vec3 p1 = room.clamp(2.0 * c[3] - c[2], margin());
    c = {p0, p1, uniform_in(rng, lo, hi), uniform_in(rng, lo, hi)};
  }
  const double u = t / cfg_.period - static_cast<double>(segment);
  const double v = 1.0 - u;
  return v * v * v * c[0] + 3.0 * v * v * u * c[1] + 3.0 * v * u * u * c[2] + u * u * u * c[3];
}

std::vector<Vec3> Scenario::targets(double t) const {
  const Room room = cfg_.room();
  const auto epoch = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / cfg_.period)));
  switch (cfg_.kind) {
    case ScenarioKind::kStaticSameGoal:
      return formation_targets(0, true);
    case ScenarioKind::kStaticDifferentGoals:
      return formation_targets(0, false);
    case ScenarioKind::kDynamicSame:
      return formation_targets(epoch, true);
    case ScenarioKind::kDynamicDifferent:
      return formation_targets(epoch, false);
    case ScenarioKind::kSwapGoals: {
      const auto base = formation_targets(0, false);
      std::vector<Vec3> out(base.size());
      const std::size_t shift = static_cast<std::size_t>(epoch % static_cast<std::uint64_t>(n_));
      for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[(i + shift) % base.size()];
      return out;
    }
    case ScenarioKind::kSwarmVsSwarm: {
      // Two half-swarms each hold a formation; they trade places every period.
      const int na = (n_ + 1) / 2;
      const int nb = n_ - na;
      Scenario a(cfg_, na, seed_ ^ 0xA5A5A5A5ULL);
      std::vector<Vec3> ta = a.formation_targets(0, false);
      std::vector<Vec3> tb;
      if (nb > 0) tb = Scenario(cfg_, nb, seed_ ^ 0x5A5A5A5AULL).formation_targets(0, false);
      const Vec3 ca = room.center() + 0.25 * cfg_.room_size * Vec3(1, 0, 0);
      const Vec3 cb = room.center() - 0.25 * cfg_.room_size * Vec3(1, 0, 0);
      auto centred = [](std::vector<Vec3> pts, const Vec3& c) {
        Vec3 mean = Vec3::Zero();
        for (const auto& p : pts) mean += p;
        if (!pts.empty()) mean /= static_cast<double>(pts.size());
        for (auto& p : pts) p += c - mean;
        return pts;
      };
      const bool swapped = epoch % 2 == 1;
      ta = centred(ta, swapped ? cb : ca);
      tb = centred(tb, swapped ? ca : cb);
      std::vector<Vec3> out;
      for (const auto& p : ta) out.push_back(room.clamp(p, margin()));
      for (const auto& p : tb) out.push_back(room.clamp(p, margin()));
      return out;
    }
    case ScenarioKind::kPursuitLissajous:
    case ScenarioKind::kPursuitBezier: {
      const Vec3 lead = cfg_.kind == ScenarioKind::kPursuitLissajous
                            ? lissajous_point(cfg_.lissajous, t) + Vec3(room.center().x(),
                                                                        room.center().y(), 0.0)
                            : bezier_point(t);
      Formation f = cfg_.formation == Formation::kRandom ? Formation::kSphere : cfg_.formation;
      std::vector<Vec3> out;
      for (const Vec3& p : formation_points(f, n_, cfg_.formation_scale)) {
        out.push_back(room.clamp(lead + p, margin()));
      }
      return out;
    }
  }
  throw ConfigError("unknown scenario kind");
}

}  // namespace equiswarm
