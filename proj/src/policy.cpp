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

#include "equiswarm/policy.hpp"

#include <cmath>
#include <string>

#include "equiswarm/errors.hpp"

namespace equiswarm {

namespace {

std::array<Vec3, kRawVectors> canonical_vectors(const QuadState& s, const GroupElement& frame) {
  const Mat3 rt = frame.rotation().transpose();
  const Vec3& t = frame.translation();
  const Mat3 rel = rt * s.attitude;
  return {rt * (s.position - t), rt * (s.target - t), rt * s.velocity, rt * s.world_rate(),
          rel.col(0), rel.col(1), rel.col(2)};
}

std::array<double, kRawScalars> invariants(const std::array<Vec3, kRawVectors>& v) {
  std::array<double, kRawScalars> out{};
  int k = 0;
  for (int i = 0; i < kRawVectors; ++i) out[static_cast<std::size_t>(k++)] = v[i].norm();
  for (int i = 0; i < kRawVectors; ++i) {
    for (int j = i + 1; j < kRawVectors; ++j) out[static_cast<std::size_t>(k++)] = v[i].dot(v[j]);
  }
  return out;
}

std::shared_ptr<const std::vector<Rot3>> repeated_rot(std::vector<Rot3> v) {
  return std::make_shared<const std::vector<Rot3>>(std::move(v));
}

}  // namespace

TensorialFeature encode_node(const QuadState& s, const GroupElement& frame) {
  const auto v = canonical_vectors(s, frame);
  TensorialFeature f;
  f.frame = frame;
  const auto inv = invariants(v);
  f.scalars.assign(inv.begin(), inv.end());
  for (int i = 0; i < kRawVectors; ++i) f.add_vector(v[static_cast<std::size_t>(i)], i < 2);
  return f;
}

std::array<double, kRawWidth> encode_raw(const QuadState& s, const GroupElement& frame) {
  const auto v = canonical_vectors(s, frame);
  const auto inv = invariants(v);
  std::array<double, kRawWidth> out{};
  std::copy(inv.begin(), inv.end(), out.begin());
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < kRawVectors; ++i) {
      out[static_cast<std::size_t>(kRawScalars + c * kRawVectors + i)] = v[static_cast<std::size_t>(i)][c];
    }
  }
  return out;
}

Rot3 to_rot3(const Mat3& r) {
  Rot3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = static_cast<Scalar>(r(i, j));
  }
  return out;
}

void PolicyConfig::validate() const {
  const auto& g = graphormer;
  if (g.layers < 1) throw ConfigError("[policy] layers must be >= 1");
  if (g.m0 < 1 || g.m1 < 1) throw ConfigError("[policy] m0 and m1 must be >= 1");
  if (g.heads < 1 || g.width() % g.heads != 0) {
    throw ConfigError("[policy] heads must divide the hidden width m0 + 3*m1 = " +
                      std::to_string(g.width()));
  }
  if (zeta1 < 1 || zeta2 < 1 || zeta3 < 1 || head_hidden < 1) {
    throw ConfigError("[policy] trunk and head sizes must be positive");
  }
  if (zeta_out < 4 || zeta_out % 4 != 0) {
    throw ConfigError("[policy] zeta_out must be a positive multiple of 4");
  }
}

PolicyConfig PolicyConfig::from_config(const Config& cfg) {
  PolicyConfig c;
  auto& g = c.graphormer;
  g.layers = cfg.get("policy", "layers", g.layers);
  g.m0 = cfg.get("policy", "m0", g.m0);
  g.m1 = cfg.get("policy", "m1", g.m1);
  g.heads = cfg.get("policy", "heads", g.heads);
  g.layer_norm = cfg.get("policy", "layer_norm", g.layer_norm);
  g.equivariant = cfg.get("policy", "equivariant", g.equivariant);
  g.temperature = cfg.get("policy", "temperature", g.temperature);
  c.zeta1 = cfg.get("policy", "zeta1", c.zeta1);
  c.zeta2 = cfg.get("policy", "zeta2", c.zeta2);
  c.zeta3 = cfg.get("policy", "zeta3", c.zeta3);
  c.zeta_out = cfg.get("policy", "zeta_out", c.zeta_out);
  c.head_hidden = cfg.get("policy", "head_hidden", c.head_hidden);
  c.log_std_init = cfg.get("policy", "log_std_init", c.log_std_init);
  c.init_mean = cfg.get("policy", "init_mean", c.init_mean);
  c.validate();
  return c;
}

std::vector<ConfigKey> PolicyConfig::config_keys() {
  std::vector<ConfigKey> keys;
  for (const char* k : {"layers", "m0", "m1", "heads", "layer_norm", "equivariant", "temperature",
                        "zeta1", "zeta2", "zeta3", "zeta_out", "head_hidden", "log_std_init",
                        "init_mean"}) {
    keys.push_back({"policy", k});
  }
  return keys;
}

nlohmann::json to_json(const PolicyConfig& c) {
  const auto& g = c.graphormer;
  return {{"layers", g.layers},           {"m0", g.m0},
          {"m1", g.m1},                   {"heads", g.heads},
          {"layer_norm", g.layer_norm},   {"equivariant", g.equivariant},
          {"temperature", g.temperature}, {"zeta1", c.zeta1},
          {"zeta2", c.zeta2},             {"zeta3", c.zeta3},
          {"zeta_out", c.zeta_out},       {"head_hidden", c.head_hidden},
          {"log_std_init", c.log_std_init}, {"init_mean", c.init_mean}};
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  auto& g = c.graphormer;
  try {
    g.layers = j.at("layers").get<int>();
    g.m0 = j.at("m0").get<int>();
    g.m1 = j.at("m1").get<int>();
    g.heads = j.at("heads").get<int>();
    g.layer_norm = j.at("layer_norm").get<bool>();
    g.equivariant = j.at("equivariant").get<bool>();
    g.temperature = j.at("temperature").get<bool>();
    c.zeta1 = j.at("zeta1").get<int>();
    c.zeta2 = j.at("zeta2").get<int>();
    c.zeta3 = j.at("zeta3").get<int>();
    c.zeta_out = j.at("zeta_out").get<int>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.log_std_init = j.at("log_std_init").get<double>();
    c.init_mean = j.value("init_mean", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy sidecar: ") + e.what());
  }
  c.validate();
  return c;
}

GraphBatch make_batch(const std::vector<LocalGraph>& graphs, bool equivariant, int heads) {
  if (graphs.empty()) throw ShapeError("make_batch: empty graph list");
  GraphBatch b;
  b.graphs = static_cast<int>(graphs.size());
  for (const auto& g : graphs) {
    if (g.node_count() < 1) throw ShapeError("make_batch: graph without nodes");
    b.node_offset.push_back(b.nodes);
    b.graph_size.push_back(g.node_count());
    b.nodes += g.node_count();
    b.slots = std::max(b.slots, g.node_count());
  }
  const int S = b.slots;
  const Rot3 eye = to_rot3(Mat3::Identity());
  auto frame_of = [&](const LocalGraph& g, int local) {
    return equivariant ? g.poses[static_cast<std::size_t>(local)] : GroupElement::identity();
  };

  b.pair_raw = Tensor::matrix(b.nodes * S, kRawWidth);
  b.ego_raw = Tensor::matrix(b.graphs, kRawWidth);
  b.pool_weight = Tensor::matrix(b.graphs, S);
  std::vector<int> center_slot(static_cast<std::size_t>(b.nodes));
  std::vector<int> pair_source(static_cast<std::size_t>(b.nodes * S));
  std::vector<Rot3> node_rot(static_cast<std::size_t>(b.nodes));
  std::vector<Rot3> pair_rot(static_cast<std::size_t>(b.nodes * S));
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(b.nodes * heads * S), 0);
  std::vector<int> pool_source(static_cast<std::size_t>(b.graphs * S));
  std::vector<Rot3> pool_rot(static_cast<std::size_t>(b.graphs * S));
  std::vector<Rot3> ego_rot(static_cast<std::size_t>(b.graphs));

  for (int gi = 0; gi < b.graphs; ++gi) {
    const LocalGraph& g = graphs[static_cast<std::size_t>(gi)];
    const int n = g.node_count();
    const int off = b.node_offset[static_cast<std::size_t>(gi)];
    for (int v = 0; v < n; ++v) {
      const int row = off + v;
      const GroupElement fv = frame_of(g, v);
      const Rot3 rv = equivariant ? to_rot3(fv.rotation()) : eye;
      node_rot[static_cast<std::size_t>(row)] = rv;
      center_slot[static_cast<std::size_t>(row)] = row * S + v;
      for (int p = 0; p < S; ++p) {
        const auto pr = static_cast<std::size_t>(row * S + p);
        pair_rot[pr] = rv;
        if (p < n) {
          pair_source[pr] = off + p;
          const auto raw = encode_raw(g.states[static_cast<std::size_t>(p)], fv);
          Scalar* dst = b.pair_raw.data() + pr * kRawWidth;
          for (int c = 0; c < kRawWidth; ++c) dst[c] = static_cast<Scalar>(raw[static_cast<std::size_t>(c)]);
          for (int h = 0; h < heads; ++h) {
            mask[static_cast<std::size_t>((row * heads + h) * S + p)] = 1;
          }
        } else {
          pair_source[pr] = row;
        }
      }
    }
    const GroupElement fe = frame_of(g, 0);
    const Rot3 re = equivariant ? to_rot3(fe.rotation()) : eye;
    ego_rot[static_cast<std::size_t>(gi)] = re;
    const auto raw = encode_raw(g.states[0], fe);
    for (int c = 0; c < kRawWidth; ++c) {
      b.ego_raw.at(gi, c) = static_cast<Scalar>(raw[static_cast<std::size_t>(c)]);
    }
    for (int p = 0; p < S; ++p) {
      const auto pr = static_cast<std::size_t>(gi * S + p);
      pool_rot[pr] = re;
      pool_source[pr] = p < n ? off + p : off;
      b.pool_weight.at(gi, p) = p < n ? Scalar(1) / static_cast<Scalar>(n) : Scalar(0);
    }
  }
  b.center_slot = std::make_shared<const std::vector<int>>(std::move(center_slot));
  b.pair_source = std::make_shared<const std::vector<int>>(std::move(pair_source));
  b.node_rot = repeated_rot(std::move(node_rot));
  b.pair_rot = repeated_rot(std::move(pair_rot));
  b.attn_mask = std::make_shared<const std::vector<std::uint8_t>>(std::move(mask));
  b.pool_source = std::make_shared<const std::vector<int>>(std::move(pool_source));
  b.pool_rot = repeated_rot(std::move(pool_rot));
  b.ego_rot = repeated_rot(std::move(ego_rot));
  return b;
}

Policy::Policy(PolicyConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const auto& g = cfg_.graphormer;
  const int D = g.width();
  lift_scalar_ = Linear(store_, "lift.scalar", kRawScalars, g.m0, rng);
  lift_vec_ = &store_.add("lift.vector", xavier_uniform(kRawVectors, g.m1, rng));
  for (int l = 0; l < g.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerWeights w;
    w.wq = Linear(store_, p + "wq", D, D, rng, false);
    w.wk = Linear(store_, p + "wk", D, D, rng, false);
    w.wv = Linear(store_, p + "wv", D, D, rng, false);
    w.mu_hidden = Linear(store_, p + "mu.hidden", D, D, rng);
    w.mu_scalar = Linear(store_, p + "mu.scalar", D, g.m0, rng);
    w.mu_gate = Linear(store_, p + "mu.gate", D, g.m1, rng);
    w.mu_vec = &store_.add(p + "mu.vector", xavier_uniform(g.m1, g.m1, rng));
    if (g.layer_norm) {
      w.ln_gain0 = &store_.add(p + "norm.gain0", Tensor::matrix(1, g.m0, 1));
      w.ln_bias0 = &store_.add(p + "norm.bias0", Tensor::matrix(1, g.m0, 0));
      w.ln_gain1 = &store_.add(p + "norm.gain1", Tensor::matrix(1, g.m1, 1));
    }
    layers_.push_back(w);
  }
  zeta1_ = Linear(store_, "zeta.0", kRawWidth, cfg_.zeta1, rng);
  zeta2_ = Linear(store_, "zeta.1", cfg_.zeta1, cfg_.zeta2, rng);
  zeta3_ = Linear(store_, "zeta.2", cfg_.zeta2 + D, cfg_.zeta3, rng);
  zeta4_ = Linear(store_, "zeta.3", cfg_.zeta3, cfg_.zeta_out, rng);
  head1_ = Linear(store_, "head.0", cfg_.zeta_out, cfg_.head_hidden, rng);
  head2_ = Linear(store_, "head.1", cfg_.head_hidden, 4, rng, true, 0.01);
  value1_ = Linear(store_, "value.0", cfg_.zeta_out, cfg_.head_hidden, rng);
  value2_ = Linear(store_, "value.1", cfg_.head_hidden, 1, rng);
  store_.get("head.1.bias").value.fill(static_cast<Scalar>(cfg_.init_mean));
  log_std_ = &store_.add("log_std", Tensor::matrix(1, 4, static_cast<Scalar>(cfg_.log_std_init)));
}

Var Policy::lift(Tape& tape, const Var& raw) const {
  const Var w = tape.param(*lift_vec_);
  std::vector<Var> parts{lift_scalar_(tape, ops::slice_cols(raw, 0, kRawScalars))};
  for (int c = 0; c < 3; ++c) {
    parts.push_back(ops::matmul(ops::slice_cols(raw, kRawScalars + c * kRawVectors, kRawVectors), w));
  }
  return ops::concat_cols(parts);
}

Var Policy::attention(Tape& tape, const GraphBatch& batch, int layer, const Var& centers,
                      const Var& pairs) const {
  const auto& w = layers_[static_cast<std::size_t>(layer)];
  const int H = cfg_.graphormer.heads;
  const int dk = cfg_.graphormer.width() / H;
  const Scalar scale = cfg_.graphormer.temperature ? Scalar(1) / std::sqrt(static_cast<Scalar>(dk))
                                                   : Scalar(1);
  const Var q = w.wq(tape, centers);
  const Var k = w.wk(tape, pairs);
  const Var v = w.wv(tape, pairs);
  const Var logits = ops::grouped_row_dot(q, k, batch.slots, H, scale);
  // One softmax per (node, head) over the slots.
  const int rows = logits.rows();
  Var alpha = ops::softmax_rows(ops::reshape(logits, rows * H, batch.slots), batch.attn_mask);
  alpha = ops::reshape(alpha, rows, H * batch.slots);
  return ops::grouped_weighted_sum(alpha, v, batch.slots, H);
}

Var Policy::feedforward(Tape& tape, int layer, const Var& z) const {
  const auto& w = layers_[static_cast<std::size_t>(layer)];
  const int m0 = cfg_.graphormer.m0, m1 = cfg_.graphormer.m1;
  const Var hidden = ops::tanh(w.mu_hidden(tape, z));
  const Var gate = ops::add_scalar(w.mu_gate(tape, hidden), 1);
  const Var mix = tape.param(*w.mu_vec);
  std::vector<Var> parts{w.mu_scalar(tape, hidden)};
  for (int c = 0; c < 3; ++c) {
    parts.push_back(ops::mul(ops::matmul(ops::slice_cols(z, m0 + c * m1, m1), mix), gate));
  }
  return ops::concat_cols(parts);
}

Var Policy::typed_norm(Tape& tape, const LayerWeights& w, const Var& x) const {
  const int m0 = cfg_.graphormer.m0, m1 = cfg_.graphormer.m1;
  constexpr Scalar kEps = 1e-5;
  Var s = ops::layer_norm_rows(ops::slice_cols(x, 0, m0), kEps);
  s = ops::add(ops::mul(s, tape.param(*w.ln_gain0)), tape.param(*w.ln_bias0));
  Var v = ops::rms_norm_rows(ops::slice_cols(x, m0, 3 * m1), kEps);
  const Var g1 = tape.param(*w.ln_gain1);
  const std::array<Var, 3> gains{g1, g1, g1};
  v = ops::mul(v, ops::concat_cols(gains));
  const std::array<Var, 2> parts{s, v};
  return ops::concat_cols(parts);
}

Var Policy::layer(Tape& tape, const GraphBatch& batch, int l, const Var& h) const {
  const int m0 = cfg_.graphormer.m0, m1 = cfg_.graphormer.m1;
  Var pairs, centers;
  if (l == 0) {
    pairs = lift(tape, tape.constant(batch.pair_raw));
    centers = ops::gather_rows(pairs, batch.center_slot);
  } else {
    pairs = ops::rotate_vector_channels(ops::gather_rows(h, batch.pair_source), batch.pair_rot,
                                        m0, m1, true);
    centers = ops::rotate_vector_channels(h, batch.node_rot, m0, m1, true);
  }
  const Var z = ops::add(centers, attention(tape, batch, l, centers, pairs));
  Var out = feedforward(tape, l, z);
  if (cfg_.graphormer.layer_norm) out = typed_norm(tape, layers_[static_cast<std::size_t>(l)], out);
  return ops::rotate_vector_channels(out, batch.node_rot, m0, m1, false);
}

Policy::Output Policy::forward(Tape& tape, const GraphBatch& batch) const {
  const auto& g = cfg_.graphormer;
  Output o;
  Var h;
  for (int l = 0; l < g.layers; ++l) h = layer(tape, batch, l, h);
  o.node_features = h;

  const Var gathered = ops::rotate_vector_channels(ops::gather_rows(h, batch.pool_source),
                                                   batch.pool_rot, g.m0, g.m1, true);
  o.pooled = ops::grouped_weighted_sum(tape.constant(batch.pool_weight), gathered, batch.slots, 1);

  Var z = ops::tanh(zeta1_(tape, tape.constant(batch.ego_raw)));
  z = ops::tanh(zeta2_(tape, z));
  const std::array<Var, 2> joined{z, o.pooled};
  z = ops::tanh(zeta3_(tape, ops::concat_cols(joined)));
  z = ops::tanh(zeta4_(tape, z));
  const int q = cfg_.zeta_out / 4;
  o.equi = ops::rotate_vector_channels(z, batch.ego_rot, q, q, false);

  o.mean = head2_(tape, ops::tanh(head1_(tape, o.equi)));
  o.value = value2_(tape, ops::tanh(value1_(tape, o.equi)));
  o.log_std = tape.param(*log_std_);
  return o;
}

PolicyEval evaluate(const Policy& policy, const std::vector<LocalGraph>& graphs) {
  const auto& g = policy.config().graphormer;
  const GraphBatch batch = make_batch(graphs, g.equivariant, g.heads);
  Tape tape;
  const auto out = policy.forward(tape, batch);
  return {out.mean.value(), out.value.value(), out.equi.value(), out.pooled.value(),
          out.log_std.value()};
}

Tensor act_on_output(const GroupElement& g, const Tensor& equi, int m0, int m1) {
  Tensor out = equi;
  const Mat3& r = g.rotation();
  for (int row = 0; row < equi.rows(); ++row) {
    for (int c = 0; c < m1; ++c) {
      Vec3 v;
      for (int k = 0; k < 3; ++k) v[k] = static_cast<double>(equi.at(row, m0 + k * m1 + c));
      const Vec3 w = r * v;
      for (int k = 0; k < 3; ++k) out.at(row, m0 + k * m1 + c) = static_cast<Scalar>(w[k]);
    }
  }
  return out;
}

}  // namespace equiswarm
