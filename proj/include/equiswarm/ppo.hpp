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
// Clipped PPO with GAE over a decentralized multi-agent rollout.

#include <atomic>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "equiswarm/autodiff.hpp"
#include "equiswarm/checkpoint.hpp"
#include "equiswarm/config.hpp"
#include "equiswarm/optim.hpp"
#include "equiswarm/policy.hpp"
#include "equiswarm/swarm.hpp"

namespace equiswarm {

struct TrainConfig {
  double lr = 1e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int rollout_length = 128;
  int batch_size = 4096;  // SGD minibatch size; the buffer is split accordingly
  int epochs = 5;
  double max_grad_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.995;
  double adam_eps = 2e-6;
  double value_coef = 0.5;
  double entropy_coef = 0.003;
  int workers = 2;
  long total_steps = 1'000'000;  // agent transitions
  std::uint64_t seed = 1;
  int checkpoint_every = 10;     // updates
  bool normalize_returns = true;  // scale rewards by the running std of the discounted return

  void validate() const;
  AdamConfig adam() const { return {lr, beta1, beta2, adam_eps, max_grad_norm}; }
  static TrainConfig from_config(const Config& cfg);
  static std::vector<ConfigKey> config_keys();
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t and
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}. `values` has one more
// entry than `rewards`: the bootstrap value after the last step.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const std::uint8_t> dones, double gamma, double lambda);

// In place: zero mean, unit (population) standard deviation.
void normalize_advantages(std::vector<double>& adv);

double gaussian_log_prob(std::span<const double> x, std::span<const double> mean,
                         std::span<const double> log_std);
// 0.5 * sum(1 + ln 2 pi + 2 log_std).
double gaussian_entropy(std::span<const double> log_std);

// Transitions indexed [worker][agent][step].
struct RolloutBuffer {
  int workers = 0;
  int agents = 0;
  int length = 0;
  std::vector<LocalGraph> graphs;
  std::vector<Vec4> actions;  // pre-clip Gaussian samples
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> distances;     // ||x - x^d|| after the step
  std::vector<double> last_values;   // [worker][agent]
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> finished_returns;  // per-agent returns of episodes that ended
  int diverged = 0;

  void allocate(int w, int a, int t);
  std::size_t capacity() const { return static_cast<std::size_t>(workers) * agents * length; }
  std::size_t index(int w, int a, int t) const {
    return (static_cast<std::size_t>(w) * agents + a) * length + t;
  }
  // Fills advantages and returns per (worker, agent) sequence.
  void compute_advantages(double gamma, double lambda);
  bool all_finite() const;
};

// Divides rewards by the running standard deviation of each stream's
// discounted return (streams are [worker][agent] sequences of a buffer).
// Statistics persist across buffers; the per-stream return restarts at done.
class ReturnScaler {
 public:
  explicit ReturnScaler(double gamma) : gamma_(gamma) {}

  // Updates the statistics with the buffer's rewards, then rescales them in place.
  void scale(RolloutBuffer& buffer);
  double stddev() const;
  long count() const { return count_; }

 private:
  double gamma_;
  std::vector<double> running_;
  long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// One rollout worker: an environment plus its sampling stream and the running
// return of the current episode.
struct Worker {
  std::unique_ptr<SwarmEnv> env;
  std::mt19937_64 rng;
  std::vector<double> episode_return;
};

// Steps every worker `length` times with the policy snapshot. With
// `deterministic` the mean action is used. Workers run on up to `threads`
// threads; results do not depend on the thread count.
void collect(const Policy& policy, std::vector<Worker>& workers, int length,
             RolloutBuffer& buffer, bool deterministic = false, int threads = 1);

// Flat training data for the PPO loss.
struct PpoData {
  int n = 0;
  int action_dim = 0;
  std::vector<double> actions;  // n * action_dim
  std::vector<double> old_log_probs;
  std::vector<double> advantages;  // normalized
  std::vector<double> returns;
};

struct PpoForward {
  Var mean;     // (B, action_dim)
  Var value;    // (B, 1)
  Var log_std;  // (1, action_dim)
};
using PpoForwardFn = std::function<PpoForward(Tape&, std::span<const int> indices)>;

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double grad_norm = 0;
  int minibatches = 0;
  bool aborted = false;  // non-finite data or loss; parameters unchanged
  std::string reason;
};

// Loss on one minibatch, recorded on `tape`.
struct PpoLoss {
  Var total;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
};
PpoLoss ppo_loss(Tape& tape, const PpoForward& out, const PpoData& data,
                 std::span<const int> indices, const TrainConfig& cfg);

// Epochs of shuffled minibatch Adam steps. On a non-finite loss or gradient the
// parameters and optimizer state are restored to their values on entry.
UpdateStats ppo_update(ParameterStore& params, Adam& adam, const PpoData& data,
                       const PpoForwardFn& forward, const TrainConfig& cfg,
                       std::mt19937_64& rng);

PpoData make_ppo_data(const RolloutBuffer& buffer);
PpoForwardFn policy_forward_fn(const Policy& policy, const RolloutBuffer& buffer);

}  // namespace equiswarm
