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
// Named-tensor container used for policy checkpoints.
//
// Byte layout (all integers little-endian):
//   magic    8 bytes  "EQSWCKPT"
//   version  u32      1
//   count    u32      number of tensors
//   count times:
//     name_len u32, name (UTF-8, name_len bytes)
//     dtype    u8     1 = float64, 2 = float32
//     rank     u8
//     dims     u32 x rank
//     data     product(dims) little-endian IEEE-754 values of `dtype`
// See docs/checkpoint_format.md.

#include <filesystem>
#include <string>
#include <vector>

#include "equiswarm/autodiff.hpp"

namespace equiswarm {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot(const ParameterStore& params);
// Loads values by name. Every parameter must be present with a matching shape;
// otherwise a ShapeError names the offending entry.
void restore(const std::vector<NamedTensor>& tensors, ParameterStore& params);

}  // namespace equiswarm
