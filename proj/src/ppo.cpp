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

#include "equiswarm/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "equiswarm/errors.hpp"

namespace equiswarm {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("[train] ") + name + " must be positive");
  };
  positive(lr, "lr");
  positive(gamma, "gamma");
  positive(lambda, "lambda");
  positive(clip, "clip");
  positive(rollout_length, "rollout_length");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(beta1, "beta1");
  positive(beta2, "beta2");
  positive(adam_eps, "adam_eps");
  positive(workers, "workers");
  positive(static_cast<double>(total_steps), "total_steps");
  positive(checkpoint_every, "checkpoint_every");
  if (gamma > 1.0 || lambda > 1.0) throw ConfigError("[train] gamma and lambda must be <= 1");
  if (value_coef < 0.0 || entropy_coef < 0.0) {
    throw ConfigError("[train] value_coef and entropy_coef must be >= 0");
  }
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig c;
  c.lr = cfg.get("train", "lr", c.lr);
  c.gamma = cfg.get("train", "gamma", c.gamma);
  c.lambda = cfg.get("train", "lambda", c.lambda);
  c.clip = cfg.get("train", "clip", c.clip);
  c.rollout_length = cfg.get("train", "rollout_length", c.rollout_length);
  c.batch_size = cfg.get("train", "batch_size", c.batch_size);
  c.epochs = cfg.get("train", "epochs", c.epochs);
  c.max_grad_norm = cfg.get("train", "max_grad_norm", c.max_grad_norm);
  c.beta1 = cfg.get("train", "beta1", c.beta1);
  c.beta2 = cfg.get("train", "beta2", c.beta2);
  c.adam_eps = cfg.get("train", "adam_eps", c.adam_eps);
  c.value_coef = cfg.get("train", "value_coef", c.value_coef);
  c.entropy_coef = cfg.get("train", "entropy_coef", c.entropy_coef);
  c.workers = cfg.get("train", "workers", c.workers);
  c.total_steps = cfg.get("train", "total_steps", c.total_steps);
  c.seed = cfg.get("train", "seed", c.seed);
  c.checkpoint_every = cfg.get("train", "checkpoint_every", c.checkpoint_every);
  c.normalize_returns = cfg.get("train", "normalize_returns", c.normalize_returns);
  c.validate();
  return c;
}

std::vector<ConfigKey> TrainConfig::config_keys() {
  std::vector<ConfigKey> keys;
  for (const char* k : {"lr", "gamma", "lambda", "clip", "rollout_length", "batch_size", "epochs",
                        "max_grad_norm", "beta1", "beta2", "adam_eps", "value_coef",
                        "entropy_coef", "workers", "total_steps", "seed", "checkpoint_every",
                        "normalize_returns"}) {
    keys.push_back({"train", k});
  }
  return keys;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ShapeError("gae: expected |values| = |rewards| + 1 and |dones| = |rewards|");
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double keep = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * keep - values[i];
    next_adv = delta + gamma * lambda * keep * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

double gaussian_log_prob(std::span<const double> x, std::span<const double> mean,
                         std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double z = (x[k] - mean[k]) * std::exp(-log_std[k]);
    lp += -0.5 * z * z - log_std[k] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

double gaussian_entropy(std::span<const double> log_std) {
  double h = 0.0;
  for (double s : log_std) h += 0.5 * (1.0 + std::log(2.0 * std::numbers::pi) + 2.0 * s);
  return h;
}

void RolloutBuffer::allocate(int w, int a, int t) {
  workers = w;
  agents = a;
  length = t;
  const std::size_t n = capacity();
  graphs.assign(n, LocalGraph{});
  actions.assign(n, Vec4::Zero());
  log_probs.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  distances.assign(n, 0.0);
  last_values.assign(static_cast<std::size_t>(w) * a, 0.0);
  advantages.clear();
  returns.clear();
  finished_returns.clear();
  diverged = 0;
}

void RolloutBuffer::compute_advantages(double gamma, double lambda) {
  advantages.assign(capacity(), 0.0);
  returns.assign(capacity(), 0.0);
  std::vector<double> v(static_cast<std::size_t>(length) + 1);
  for (int w = 0; w < workers; ++w) {
    for (int a = 0; a < agents; ++a) {
      const std::size_t base = index(w, a, 0);
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(base), length, v.begin());
      v[static_cast<std::size_t>(length)] = last_values[static_cast<std::size_t>(w) * agents + a];
      const auto res = gae(std::span(rewards).subspan(base, static_cast<std::size_t>(length)), v,
                           std::span(dones).subspan(base, static_cast<std::size_t>(length)), gamma,
                           lambda);
      std::copy(res.advantages.begin(), res.advantages.end(),
                advantages.begin() + static_cast<std::ptrdiff_t>(base));
      std::copy(res.returns.begin(), res.returns.end(),
                returns.begin() + static_cast<std::ptrdiff_t>(base));
    }
  }
}

void ReturnScaler::scale(RolloutBuffer& buffer) {
  const std::size_t streams = static_cast<std::size_t>(buffer.workers) * buffer.agents;
  if (running_.size() != streams) running_.assign(streams, 0.0);
  for (std::size_t s = 0; s < streams; ++s) {
    const std::size_t base = s * static_cast<std::size_t>(buffer.length);
    for (int t = 0; t < buffer.length; ++t) {
      const std::size_t i = base + static_cast<std::size_t>(t);
      running_[s] = gamma_ * running_[s] + buffer.rewards[i];
      ++count_;
      const double delta = running_[s] - mean_;
      mean_ += delta / static_cast<double>(count_);
      m2_ += delta * (running_[s] - mean_);
      if (buffer.dones[i]) running_[s] = 0.0;
    }
  }
  const double sd = stddev();
  for (double& r : buffer.rewards) r /= sd;
}

double ReturnScaler::stddev() const {
  if (count_ < 2) return 1.0;
  return std::max(std::sqrt(m2_ / static_cast<double>(count_)), 1e-8);
}

bool RolloutBuffer::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(log_probs) && finite(rewards) && finite(values) && finite(last_values) &&
         finite(advantages) && finite(returns) &&
         std::all_of(actions.begin(), actions.end(), [](const Vec4& a) { return a.allFinite(); });
}

namespace {

void run_worker(const Policy& policy, Worker& wk, int w, int length, RolloutBuffer& buf,
                bool deterministic, std::vector<std::vector<double>>& finished) {
  SwarmEnv& env = *wk.env;
  const int n = env.config().n_agents;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < length; ++t) {
    std::vector<LocalGraph> graphs;
    for (int i = 0; i < n; ++i) graphs.push_back(env.local_graph(i));
    const PolicyEval ev = evaluate(policy, graphs);
    std::vector<Vec4> raw(static_cast<std::size_t>(n));
    std::array<double, 4> log_std{};
    for (int k = 0; k < 4; ++k) log_std[static_cast<std::size_t>(k)] = ev.log_std.at(0, k);
    for (int i = 0; i < n; ++i) {
      std::array<double, 4> mean{}, sample{};
      for (int k = 0; k < 4; ++k) {
        mean[static_cast<std::size_t>(k)] = ev.mean.at(i, k);
        sample[static_cast<std::size_t>(k)] =
            deterministic ? mean[static_cast<std::size_t>(k)]
                          : mean[static_cast<std::size_t>(k)] +
                                std::exp(log_std[static_cast<std::size_t>(k)]) * normal(wk.rng);
      }
      const std::size_t idx = buf.index(w, i, t);
      raw[static_cast<std::size_t>(i)] = Vec4(sample[0], sample[1], sample[2], sample[3]);
      buf.graphs[idx] = graphs[static_cast<std::size_t>(i)];
      buf.actions[idx] = raw[static_cast<std::size_t>(i)];
      buf.log_probs[idx] = gaussian_log_prob(sample, mean, log_std);
      buf.values[idx] = ev.value.at(i, 0);
    }
    const StepResult res = env.step(raw);
    for (int i = 0; i < n; ++i) {
      const std::size_t idx = buf.index(w, i, t);
      buf.rewards[idx] = res.rewards[static_cast<std::size_t>(i)].total;
      buf.dones[idx] = res.done ? 1 : 0;
      const QuadState& q = env.state().agents[static_cast<std::size_t>(i)];
      buf.distances[idx] = (q.position - q.target).norm();
      wk.episode_return[static_cast<std::size_t>(i)] += buf.rewards[idx];
    }
    if (res.done) {
      if (res.diverged) {
        finished[static_cast<std::size_t>(w)].push_back(std::nan(""));
      } else {
        for (double r : wk.episode_return) finished[static_cast<std::size_t>(w)].push_back(r);
      }
      std::fill(wk.episode_return.begin(), wk.episode_return.end(), 0.0);
      env.reset();
    }
  }
  std::vector<LocalGraph> graphs;
  for (int i = 0; i < n; ++i) graphs.push_back(env.local_graph(i));
  const PolicyEval ev = evaluate(policy, graphs);
  for (int i = 0; i < n; ++i) {
    buf.last_values[static_cast<std::size_t>(w) * n + i] = ev.value.at(i, 0);
  }
}

}  // namespace

void collect(const Policy& policy, std::vector<Worker>& workers, int length,
             RolloutBuffer& buffer, bool deterministic, int threads) {
  if (workers.empty()) throw Error("collect: no workers");
  const int agents = workers.front().env->config().n_agents;
  const int nw = static_cast<int>(workers.size());
  buffer.allocate(nw, agents, length);
  for (auto& wk : workers) {
    if (wk.episode_return.size() != static_cast<std::size_t>(agents)) {
      wk.episode_return.assign(static_cast<std::size_t>(agents), 0.0);
    }
  }
  std::vector<std::vector<double>> finished(static_cast<std::size_t>(nw));
  threads = std::clamp(threads, 1, nw);
  if (threads == 1) {
    for (int w = 0; w < nw; ++w) {
      run_worker(policy, workers[static_cast<std::size_t>(w)], w, length, buffer, deterministic,
                 finished);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int w; (w = next.fetch_add(1)) < nw;) {
            run_worker(policy, workers[static_cast<std::size_t>(w)], w, length, buffer,
                       deterministic, finished);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (const auto& f : finished) {
    for (double r : f) {
      if (std::isnan(r)) {
        ++buffer.diverged;
      } else {
        buffer.finished_returns.push_back(r);
      }
    }
  }
}

PpoLoss ppo_loss(Tape& tape, const PpoForward& out, const PpoData& data,
                 std::span<const int> indices, const TrainConfig& cfg) {
  const int b = static_cast<int>(indices.size());
  const int d = data.action_dim;
  Tensor act = Tensor::matrix(b, d), old_lp = Tensor::matrix(b, 1), adv = Tensor::matrix(b, 1),
         ret = Tensor::matrix(b, 1);
  for (int r = 0; r < b; ++r) {
    const auto i = static_cast<std::size_t>(indices[static_cast<std::size_t>(r)]);
    for (int k = 0; k < d; ++k) act.at(r, k) = static_cast<Scalar>(data.actions[i * d + k]);
    old_lp.at(r, 0) = static_cast<Scalar>(data.old_log_probs[i]);
    adv.at(r, 0) = static_cast<Scalar>(data.advantages[i]);
    ret.at(r, 0) = static_cast<Scalar>(data.returns[i]);
  }
  using namespace ops;
  const Scalar half_log_2pi = static_cast<Scalar>(0.5 * std::log(2.0 * std::numbers::pi));
  const Var z = mul(sub(tape.constant(act), out.mean), exp(neg(out.log_std)));
  // (B,1): -0.5 sum z^2 - sum log_std - d/2 ln 2 pi
  Var logp = scale(mean(square(z), 1), Scalar(-0.5) * d);
  logp = add_scalar(sub(logp, sum(out.log_std)), -half_log_2pi * d);
  const Var ratio = exp(sub(logp, tape.constant(old_lp)));
  const Var a = tape.constant(adv);
  const Var surrogate = minimum(mul(ratio, a), mul(clip(ratio, 1 - cfg.clip, 1 + cfg.clip), a));
  const Var policy_loss = neg(mean_all(surrogate));
  const Var value_loss = mean_all(square(sub(out.value, tape.constant(ret))));
  const Var entropy =
      add_scalar(sum(out.log_std), static_cast<Scalar>(0.5 * d * (1.0 + std::log(2.0 * std::numbers::pi))));

  PpoLoss loss;
  loss.total = add(add(policy_loss, scale(value_loss, static_cast<Scalar>(cfg.value_coef))),
                   scale(entropy, static_cast<Scalar>(-cfg.entropy_coef)));
  loss.policy_loss = policy_loss.value().item();
  loss.value_loss = value_loss.value().item();
  loss.entropy = entropy.value().item();
  int clipped = 0;
  for (int r = 0; r < b; ++r) {
    if (std::abs(static_cast<double>(ratio.value().at(r, 0)) - 1.0) > cfg.clip) ++clipped;
  }
  loss.clip_fraction = b > 0 ? static_cast<double>(clipped) / b : 0.0;
  return loss;
}

UpdateStats ppo_update(ParameterStore& params, Adam& adam, const PpoData& data,
                       const PpoForwardFn& forward, const TrainConfig& cfg,
                       std::mt19937_64& rng) {
  UpdateStats st;
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(data.actions) || !finite(data.old_log_probs) || !finite(data.advantages) ||
      !finite(data.returns)) {
    st.aborted = true;
    st.reason = "non-finite values in rollout data";
    return st;
  }
  const auto saved = snapshot(params);
  const Adam saved_adam = adam;
  auto abort = [&](const std::string& why) {
    restore(saved, params);
    adam = saved_adam;
    params.zero_grad();
    UpdateStats a;
    a.aborted = true;
    a.reason = why;
    return a;
  };

  std::vector<int> order(static_cast<std::size_t>(data.n));
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.batch_size, data.n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start + mb <= data.n; start += mb) {
      const std::span<const int> idx(order.data() + start, static_cast<std::size_t>(mb));
      Tape tape;
      params.zero_grad();
      const PpoForward out = forward(tape, idx);
      const PpoLoss loss = ppo_loss(tape, out, data, idx, cfg);
      if (!std::isfinite(loss.total.value().item())) return abort("non-finite loss");
      tape.backward(loss.total);
      AdamStepStats s;
      try {
        s = adam.step(params);
      } catch (const NumericError& e) {
        return abort(e.what());
      }
      st.policy_loss += loss.policy_loss;
      st.value_loss += loss.value_loss;
      st.entropy += loss.entropy;
      st.clip_fraction += loss.clip_fraction;
      st.grad_norm += s.grad_norm;
      ++st.minibatches;
    }
  }
  if (st.minibatches > 0) {
    const double k = st.minibatches;
    st.policy_loss /= k;
    st.value_loss /= k;
    st.entropy /= k;
    st.clip_fraction /= k;
    st.grad_norm /= k;
  }
  return st;
}

PpoData make_ppo_data(const RolloutBuffer& buffer) {
  if (buffer.advantages.size() != buffer.capacity()) {
    throw Error("make_ppo_data: advantages have not been computed");
  }
  PpoData d;
  d.n = static_cast<int>(buffer.capacity());
  d.action_dim = 4;
  d.actions.reserve(buffer.capacity() * 4);
  for (const Vec4& a : buffer.actions) {
    for (int k = 0; k < 4; ++k) d.actions.push_back(a[k]);
  }
  d.old_log_probs = buffer.log_probs;
  d.advantages = buffer.advantages;
  normalize_advantages(d.advantages);
  d.returns = buffer.returns;
  return d;
}

PpoForwardFn policy_forward_fn(const Policy& policy, const RolloutBuffer& buffer) {
  return [&policy, &buffer](Tape& tape, std::span<const int> indices) {
    std::vector<LocalGraph> graphs;
    graphs.reserve(indices.size());
    for (int i : indices) graphs.push_back(buffer.graphs[static_cast<std::size_t>(i)]);
    const auto& g = policy.config().graphormer;
    const GraphBatch batch = make_batch(graphs, g.equivariant, g.heads);
    const Policy::Output out = policy.forward(tape, batch);
    return PpoForward{out.mean, out.value, out.log_std};
  };
}

}  // namespace equiswarm
