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
// Dense arithmetic kernels used by the autodiff engine.
//
// Every kernel has a portable scalar reference implementation and, where the
// target supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The
// variant is picked once at startup from CPUID; EQUISWARM_SIMD=scalar forces
// the reference path. All matrices are row-major and densely packed.

#include <cstddef>
#include <string_view>

#include "equiswarm/scalar.hpp"

namespace equiswarm::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  // c[m,n] (+)= a[m,k] * b[k,n]
  void (*gemm_nn)(int m, int n, int k, const Scalar* a, const Scalar* b,
                  Scalar* c, bool accumulate);
  // c[m,n] (+)= a[m,k] * b[n,k]^T
  void (*gemm_nt)(int m, int n, int k, const Scalar* a, const Scalar* b,
                  Scalar* c, bool accumulate);
  // c[m,n] (+)= a[k,m]^T * b[k,n]
  void (*gemm_tn)(int m, int n, int k, const Scalar* a, const Scalar* b,
                  Scalar* c, bool accumulate);
  Scalar (*dot)(const Scalar* x, const Scalar* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or not supported by this CPU.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The table selected for this process.
const KernelTable& active();
std::string_view isa_name(Isa isa);

// Overrides the process-wide selection. Intended for tests and benchmarks;
// not safe to call while other threads run kernels.
void force_isa(Isa isa);

inline void gemm_nn(int m, int n, int k, const Scalar* a, const Scalar* b,
                    Scalar* c, bool accumulate = false) {
  active().gemm_nn(m, n, k, a, b, c, accumulate);
}
inline void gemm_nt(int m, int n, int k, const Scalar* a, const Scalar* b,
                    Scalar* c, bool accumulate = false) {
  active().gemm_nt(m, n, k, a, b, c, accumulate);
}
inline void gemm_tn(int m, int n, int k, const Scalar* a, const Scalar* b,
                    Scalar* c, bool accumulate = false) {
  active().gemm_tn(m, n, k, a, b, c, accumulate);
}
inline Scalar dot(const Scalar* x, const Scalar* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline void axpy(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}

}  // namespace equiswarm::kernels
