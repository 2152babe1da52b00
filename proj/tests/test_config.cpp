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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "equiswarm/errors.hpp"
#include "equiswarm/trainer.hpp"
#include "fixtures.hpp"

using namespace equiswarm;
using namespace equiswarm::test;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(EQUISWARM_SOURCE_DIR) / "configs";

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("equiswarm_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

const std::vector<ConfigKey> kKeys{{"a", "x"}, {"a", "y"}, {"b", "y"}, {"b", "flag"}};

}  // namespace

TEST_CASE("parsing and typed access") {
  const Config c = Config::parse("[a]\nx = 3\ny = 2.5\n[b]\nflag = on\nname = quad\n");
  CHECK(c.get<int>("a", "x", 0) == 3);
  CHECK(c.get<double>("a", "y", 0.0) == 2.5);
  CHECK(c.get<bool>("b", "flag", false));
  CHECK(c.get<std::string>("b", "name", "") == "quad");
  CHECK(c.get<int>("a", "missing", 7) == 7);
  CHECK(c.get<int>("nosection", "x", 8) == 8);
  CHECK_FALSE(c.has("a", "z"));
  CHECK(c.entries().size() == 4);
}

TEST_CASE("typed errors name the field") {
  const Config c = Config::parse("[train]\nlr = fast\nepochs = 2.5\n[env]\nflag = maybe\n");
  try {
    c.get<double>("train", "lr", 0.0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lr") != std::string::npos);
  }
  CHECK_THROWS_AS(c.get<int>("train", "epochs", 0), ConfigError);
  CHECK_THROWS_AS(c.get<bool>("env", "flag", false), ConfigError);
  CHECK_THROWS_AS(Config::parse("[a\nx = 1\n"), ConfigError);
}

TEST_CASE("overrides") {
  Config c;
  c.apply_override("x=4", kKeys);
  CHECK(c.get<int>("a", "x", 0) == 4);
  c.apply_override("b.y=5", kKeys);
  CHECK(c.get<int>("b", "y", 0) == 5);
  CHECK_FALSE(c.has("a", "y"));
  // y lives in two sections.
  CHECK_THROWS_WITH_AS(c.apply_override("y=1", kKeys), doctest::Contains("ambiguous"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("z=1", kKeys), ConfigError);
  CHECK_THROWS_AS(c.apply_override("a.z=1", kKeys), ConfigError);
  CHECK_THROWS_AS(c.apply_override("novalue", kKeys), ConfigError);
  CHECK_THROWS_AS(c.apply_override("=1", kKeys), ConfigError);
  c.apply_override("a.x=", kKeys);
  CHECK(c.raw("a", "x") == std::string());
}

TEST_CASE("unknown keys are rejected") {
  CHECK_NOTHROW(Config::parse("[a]\nx = 1\n").validate_keys(kKeys));
  CHECK_THROWS_WITH_AS(Config::parse("[a]\nlearning_rate = 1\n").validate_keys(kKeys),
                       doctest::Contains("learning_rate"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_config(Config::parse("[train]\nlearning_rate = 1\n")),
                  ConfigError);
}

TEST_CASE("missing file names the path") {
  CHECK_THROWS_WITH_AS(Config::load("/nonexistent/exp.ini"), doctest::Contains("/nonexistent/exp.ini"),
                       ConfigError);
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"default.ini", "smoke.ini", "toy.ini", "crazyflie.ini"}) {
    CAPTURE(name);
    const Config c = load_config(kConfigs / name, {});
    CHECK_NOTHROW(ExperimentConfig::from_config(c));
  }
}

TEST_CASE("experiment config applies overrides and defaults") {
  const Config c = load_config(kConfigs / "toy.ini", {"lr=0.002", "env.n_agents=3"});
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  CHECK(e.train.lr == 0.002);
  CHECK(e.env.n_agents == 3);
  CHECK(e.policy.graphormer.layers == 1);
  // Without an explicit init_mean the action mean starts at hover.
  CHECK(e.policy.init_mean == doctest::Approx(hover_raw_action(e.quad)));
  const double hover_thrust = (1.0 + hover_raw_action(e.quad)) / 2.0;
  CHECK(hover_thrust == doctest::Approx(e.quad.hover_action()).epsilon(1e-12));
  const auto j = e.to_json();
  CHECK(j["train"]["lr"] == 0.002);
  CHECK(j["env"]["n_agents"] == 3);
  const ExperimentConfig f =
      ExperimentConfig::from_config(load_config(kConfigs / "toy.ini", {"policy.init_mean=0.25"}));
  CHECK(f.policy.init_mean == 0.25);
}

TEST_CASE("checkpoint round trip with sidecar") {
  TempDir dir;
  std::mt19937_64 rng(3);
  Policy a(small_policy_config(), 17);
  const auto path = dir.path / "ckpt.bin";
  save_policy(path, a);
  CHECK(std::filesystem::exists(sidecar_path(path)));
  CHECK(sidecar_path(path).filename() == "ckpt.bin.json");
  const auto b = load_policy(path);
  CHECK(to_json(b->config()) == to_json(a.config()));
  const auto lg = random_graph(rng, 4);
  const PolicyEval ea = evaluate(a, {lg});
  const PolicyEval eb = evaluate(*b, {lg});
  for (int c = 0; c < 4; ++c) CHECK(ea.mean.at(0, c) == eb.mean.at(0, c));
  CHECK(ea.value.at(0, 0) == eb.value.at(0, 0));

  CHECK_THROWS_AS(load_policy(dir.path / "absent.bin"), ConfigError);
  std::filesystem::remove(sidecar_path(path));
  CHECK_THROWS_AS(load_policy(path), ConfigError);
  std::ofstream(sidecar_path(path)) << "{ not json";
  CHECK_THROWS_AS(load_policy(path), ConfigError);
}

TEST_CASE("thread budget") {
  ::setenv("EQUISWARM_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  ::setenv("EQUISWARM_THREADS", "many", 1);
  CHECK_THROWS_AS(thread_budget(), ConfigError);
  ::unsetenv("EQUISWARM_THREADS");
  CHECK(thread_budget() >= 1);
}

TEST_CASE("a short training run writes its artifacts and evaluates deterministically") {
  TempDir dir;
  const ExperimentConfig cfg =
      ExperimentConfig::from_config(load_config(kConfigs / "toy.ini", {"total_steps=512"}));
  Policy policy(cfg.policy, cfg.train.seed);
  int seen = 0;
  TrainOptions opts;
  opts.out_dir = dir.path;
  opts.on_update = [&](const UpdateRecord& r) { CHECK(r.update == ++seen); };
  const TrainResult res = train(cfg, policy, opts);
  CHECK_FALSE(res.aborted);
  CHECK(static_cast<int>(res.history.size()) == seen);
  CHECK(seen >= 1);
  CHECK(res.history.back().steps >= 512);
  CHECK(std::filesystem::exists(dir.path / "metrics.jsonl"));
  CHECK(std::filesystem::exists(res.last_checkpoint));

  const EvalResult e1 = evaluate_policy(cfg, policy, 2, 5, true);
  const EvalResult e2 = evaluate_policy(cfg, policy, 2, 5);
  REQUIRE(e1.episodes.size() == 2);
  CHECK(e1.traces.size() == 2);
  CHECK(e2.traces.empty());
  CHECK(e1.average.mean_final_distance == e2.average.mean_final_distance);
  CHECK(e1.episodes[0].mean_final_distance != e1.episodes[1].mean_final_distance);
}

TEST_CASE("a stop request ends training at the next update boundary") {
  const ExperimentConfig cfg =
      ExperimentConfig::from_config(load_config(kConfigs / "toy.ini", {"total_steps=100000"}));
  Policy policy(cfg.policy, 1);
  std::atomic<bool> stop{false};
  TrainOptions opts;
  opts.stop = &stop;
  opts.on_update = [&](const UpdateRecord& r) {
    if (r.update == 2) stop = true;
  };
  const TrainResult res = train(cfg, policy, opts);
  CHECK(res.interrupted);
  CHECK(res.history.size() == 2);
}
