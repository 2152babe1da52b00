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

// NEON variants for aarch64, where Advanced SIMD is architecturally mandatory.

#include <arm_neon.h>

#include <cmath>

#include "equiswarm/kernels.hpp"

namespace equiswarm::kernels {
namespace neon_impl {

template <typename T>
struct Pack;

template <>
struct Pack<double> {
  using Reg = float64x2_t;
  static constexpr int kWidth = 2;
  static Reg zero() { return vdupq_n_f64(0.0); }
  static Reg set1(double v) { return vdupq_n_f64(v); }
  static Reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, Reg r) { vst1q_f64(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return vfmaq_f64(c, a, b); }
  static Reg add(Reg a, Reg b) { return vaddq_f64(a, b); }
  static double hsum(Reg r) { return vaddvq_f64(r); }
};

template <>
struct Pack<float> {
  using Reg = float32x4_t;
  static constexpr int kWidth = 4;
  static Reg zero() { return vdupq_n_f32(0.0f); }
  static Reg set1(float v) { return vdupq_n_f32(v); }
  static Reg load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, Reg r) { vst1q_f32(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return vfmaq_f32(c, a, b); }
  static Reg add(Reg a, Reg b) { return vaddq_f32(a, b); }
  static float hsum(Reg r) { return vaddvq_f32(r); }
};

using P = Pack<Scalar>;
constexpr int W = P::kWidth;

inline void row_update(int n, int k, const Scalar* acol, std::size_t astride,
                       const Scalar* b, Scalar* crow, bool accumulate) {
  int j = 0;
  for (; j + 2 * W <= n; j += 2 * W) {
    P::Reg c0 = accumulate ? P::load(crow + j) : P::zero();
    P::Reg c1 = accumulate ? P::load(crow + j + W) : P::zero();
    for (int p = 0; p < k; ++p) {
      const P::Reg av = P::set1(acol[p * astride]);
      const Scalar* brow = b + static_cast<std::size_t>(p) * n + j;
      c0 = P::fmadd(av, P::load(brow), c0);
      c1 = P::fmadd(av, P::load(brow + W), c1);
    }
    P::store(crow + j, c0);
    P::store(crow + j + W, c1);
  }
  for (; j < n; ++j) {
    Scalar s = accumulate ? crow[j] : Scalar(0);
    for (int p = 0; p < k; ++p) {
      s = std::fma(acol[p * astride], b[static_cast<std::size_t>(p) * n + j], s);
    }
    crow[j] = s;
  }
}

void gemm_nn(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    row_update(n, k, a + static_cast<std::size_t>(i) * k, 1, b,
               c + static_cast<std::size_t>(i) * n, accumulate);
  }
}

void gemm_tn(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    row_update(n, k, a + i, static_cast<std::size_t>(m), b,
               c + static_cast<std::size_t>(i) * n, accumulate);
  }
}

Scalar dot(const Scalar* x, const Scalar* y, std::size_t n) {
  P::Reg s0 = P::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) s0 = P::fmadd(P::load(x + i), P::load(y + i), s0);
  Scalar s = P::hsum(s0);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void gemm_nt(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const Scalar* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const Scalar s = dot(arow, b + static_cast<std::size_t>(j) * k,
                           static_cast<std::size_t>(k));
      Scalar& out = c[static_cast<std::size_t>(i) * n + j];
      out = accumulate ? out + s : s;
    }
  }
}

void axpy(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n) {
  const P::Reg av = P::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    P::store(y + i, P::fmadd(av, P::load(x + i), P::load(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace neon_impl

const KernelTable* neon_table() {
  static const KernelTable table{Isa::kNeon, neon_impl::gemm_nn, neon_impl::gemm_nt,
                                 neon_impl::gemm_tn, neon_impl::dot, neon_impl::axpy};
  return &table;
}

}  // namespace equiswarm::kernels
