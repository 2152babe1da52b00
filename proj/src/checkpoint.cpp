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

#include "equiswarm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "equiswarm/errors.hpp"

namespace equiswarm {
namespace {

constexpr char kMagic[8] = {'E', 'Q', 'S', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kFloat64 = 1;
constexpr std::uint8_t kFloat32 = 2;

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ConfigError("checkpoint truncated: " + path.string());
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put<std::uint8_t>(out, sizeof(Scalar) == 8 ? kFloat64 : kFloat32);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(nt.tensor.rank()));
    for (int d : nt.tensor.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Scalar v : nt.tensor.values()) put<Scalar>(out, v);
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in, path);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto len = get<std::uint32_t>(in, path);
    nt.name.resize(len);
    if (!in.read(nt.name.data(), len)) throw ConfigError("checkpoint truncated: " + path.string());
    const auto dtype = get<std::uint8_t>(in, path);
    const auto rank = get<std::uint8_t>(in, path);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get<std::uint32_t>(in, path));
    Tensor t(shape);
    for (auto& v : t.storage()) {
      if (dtype == kFloat64) v = static_cast<Scalar>(get<double>(in, path));
      else if (dtype == kFloat32) v = static_cast<Scalar>(get<float>(in, path));
      else throw ConfigError("unknown dtype tag " + std::to_string(dtype) + " for " + nt.name);
    }
    nt.tensor = std::move(t);
    tensors.push_back(std::move(nt));
  }
  return tensors;
}

std::vector<NamedTensor> snapshot(const ParameterStore& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(const std::vector<NamedTensor>& tensors, ParameterStore& params) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
  for (auto& p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ShapeError("checkpoint lacks parameter " + p->name);
    if (!it->second->same_shape(p->value)) {
      throw ShapeError("checkpoint shape mismatch for " + p->name + ": file " +
                       it->second->shape_string() + ", model " + p->value.shape_string());
    }
    p->value = *it->second;
  }
}

}  // namespace equiswarm
