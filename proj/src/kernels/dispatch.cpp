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
#include <string>

#include "equiswarm/kernels.hpp"

namespace equiswarm::kernels {

#if !defined(EQUISWARM_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !defined(EQUISWARM_HAVE_NEON)
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("EQUISWARM_SIMD")) {
    if (std::string(env) == "scalar") return &scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& selected() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() {
  return *selected().load(std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

void force_isa(Isa isa) {
  const KernelTable* t = &scalar_table();
  if (isa == Isa::kAvx2 && avx2_table()) t = avx2_table();
  if (isa == Isa::kNeon && neon_table()) t = neon_table();
  selected().store(t, std::memory_order_relaxed);
}

}  // namespace equiswarm::kernels
