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
// Group-equivariant graph transformer policy.
//
// Every node state is first expressed in a local frame (encode_node). Each
// transformer layer re-expresses the features of a node's neighborhood in that
// node's frame, runs an ordinary attention + feedforward update there, and maps
// the result back to the world frame. The ego agent pools the final features in
// its own frame, runs the trunk, and maps the trunk's vector channels back to
// the world frame. A non-equivariant head turns that output into the Gaussian
// action mean; the critic uses a scalar head on the same output.
//
// Typed rows use the layout [m0 scalars | m1 x | m1 y | m1 z].

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "json.hpp"

#include "equiswarm/autodiff.hpp"
#include "equiswarm/config.hpp"
#include "equiswarm/group.hpp"
#include "equiswarm/swarm.hpp"

namespace equiswarm {

// Canonical node encoding: 7 vectors and their 28 invariants.
inline constexpr int kRawVectors = 7;
inline constexpr int kRawScalars = kRawVectors + kRawVectors * (kRawVectors - 1) / 2;
inline constexpr int kRawWidth = kRawScalars + 3 * kRawVectors;

// Vectors, in order: position, target, velocity, world angular velocity and
// the three columns of R_g^T R, all expressed in `frame`. Scalars: the seven
// norms followed by the 21 pairwise dot products (i < j). The first two
// vectors are positional.
TensorialFeature encode_node(const QuadState& s, const GroupElement& frame);
// Same values flattened in the typed layout.
std::array<double, kRawWidth> encode_raw(const QuadState& s, const GroupElement& frame);

struct GraphormerConfig {
  int layers = 3;
  int m0 = 60;
  int m1 = 60;
  int heads = 4;
  bool layer_norm = true;
  bool equivariant = true;
  bool temperature = true;  // scale logits by 1/sqrt(d_k)

  int width() const { return m0 + 3 * m1; }
};

struct PolicyConfig {
  GraphormerConfig graphormer;
  int zeta1 = 256;
  int zeta2 = 128;
  int zeta3 = 256;
  int zeta_out = 256;  // split into zeta_out/4 scalars and zeta_out/4 vectors
  int head_hidden = 256;
  double log_std_init = -0.6931471805599453;  // ln 0.5
  double init_mean = 0.0;                     // initial bias of the action mean

  void validate() const;
  static PolicyConfig from_config(const Config& cfg);
  static std::vector<ConfigKey> config_keys();
};

nlohmann::json to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

// Precomputed, data-only view of a batch of local graphs. Every node attends
// over all nodes of its own graph (padded to `slots` with a mask).
struct GraphBatch {
  int graphs = 0;
  int nodes = 0;  // total nodes over all graphs
  int slots = 0;  // max nodes per graph
  std::vector<int> graph_size;
  std::vector<int> node_offset;  // first node row of each graph; ego first

  Tensor pair_raw;  // (nodes*slots, kRawWidth): slot p of graph encoded in node v's frame
  Tensor ego_raw;   // (graphs, kRawWidth): ego encoded in its own frame
  std::shared_ptr<const std::vector<int>> center_slot;  // (nodes): row of (v, v) in pair_raw
  std::shared_ptr<const std::vector<int>> pair_source;  // (nodes*slots): node row of slot p
  std::shared_ptr<const std::vector<Rot3>> node_rot;    // (nodes): frame of v
  std::shared_ptr<const std::vector<Rot3>> pair_rot;    // (nodes*slots): frame of v
  std::shared_ptr<const std::vector<std::uint8_t>> attn_mask;  // (nodes*heads*slots)
  std::shared_ptr<const std::vector<int>> pool_source;  // (graphs*slots): node row
  std::shared_ptr<const std::vector<Rot3>> pool_rot;    // (graphs*slots): ego frame
  std::shared_ptr<const std::vector<Rot3>> ego_rot;     // (graphs)
  Tensor pool_weight;                                   // (graphs, slots)
};

// With `equivariant` false every frame is the identity.
GraphBatch make_batch(const std::vector<LocalGraph>& graphs, bool equivariant, int heads);

Rot3 to_rot3(const Mat3& r);

class Policy {
 public:
  struct Output {
    Var node_features;  // (nodes, width) world frame after the last layer
    Var pooled;         // (graphs, width) ego frame
    Var equi;           // (graphs, zeta_out) world frame
    Var mean;           // (graphs, 4)
    Var value;          // (graphs, 1)
    Var log_std;        // (1, 4)
  };

  Policy(PolicyConfig cfg, std::uint64_t seed);
  Policy(const Policy&) = delete;
  Policy& operator=(const Policy&) = delete;

  const PolicyConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  Output forward(Tape& tape, const GraphBatch& batch) const;

  // Stages, exposed for tests.
  Var lift(Tape& tape, const Var& raw) const;
  // Attention read-out for centers C (nodes, width) over pair features
  // P (nodes*slots, width), both in the centers' frames.
  Var attention(Tape& tape, const GraphBatch& batch, int layer, const Var& centers,
                const Var& pairs) const;
  Var feedforward(Tape& tape, int layer, const Var& z) const;
  // One full layer. `h` is the previous world-frame output, ignored for layer 0.
  Var layer(Tape& tape, const GraphBatch& batch, int l, const Var& h) const;

 private:
  struct LayerWeights {
    Linear wq, wk, wv;
    Linear mu_hidden, mu_scalar, mu_gate;
    Parameter* mu_vec = nullptr;  // (m1, m1) channel mixing
    Parameter* ln_gain0 = nullptr;
    Parameter* ln_bias0 = nullptr;
    Parameter* ln_gain1 = nullptr;  // (1, m1), shared by x/y/z
  };

  Var typed_norm(Tape& tape, const LayerWeights& w, const Var& x) const;

  PolicyConfig cfg_;
  ParameterStore store_;
  Linear lift_scalar_;
  Parameter* lift_vec_ = nullptr;  // (kRawVectors, m1)
  std::vector<LayerWeights> layers_;
  Linear zeta1_, zeta2_, zeta3_, zeta4_;
  Linear head1_, head2_, value1_, value2_;
  Parameter* log_std_ = nullptr;
};

// Forward-only evaluation results as plain tensors.
struct PolicyEval {
  Tensor mean;
  Tensor value;
  Tensor equi;
  Tensor pooled;
  Tensor log_std;
};
PolicyEval evaluate(const Policy& policy, const std::vector<LocalGraph>& graphs);

// Applies g to the world-frame vector channels of a trunk output row block.
Tensor act_on_output(const GroupElement& g, const Tensor& equi, int m0, int m1);

}  // namespace equiswarm
