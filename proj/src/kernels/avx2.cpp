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

// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after avx2_table() confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "equiswarm/kernels.hpp"

namespace equiswarm::kernels {
namespace avx2_impl {

template <typename T>
struct Pack;

template <>
struct Pack<double> {
  using Reg = __m256d;
  static constexpr int kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg set1(double v) { return _mm256_set1_pd(v); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg r) { _mm256_storeu_pd(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static double hsum(Reg r) {
    __m128d lo = _mm256_castpd256_pd128(r);
    __m128d hi = _mm256_extractf128_pd(r, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
  }
};

template <>
struct Pack<float> {
  using Reg = __m256;
  static constexpr int kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg set1(float v) { return _mm256_set1_ps(v); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg r) { _mm256_storeu_ps(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static float hsum(Reg r) {
    __m128 lo = _mm256_castps256_ps128(r);
    __m128 hi = _mm256_extractf128_ps(r, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehl_ps(lo, lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_shuffle_ps(lo, lo, 0x1);
    return _mm_cvtss_f32(_mm_add_ss(lo, sh));
  }
};

using P = Pack<Scalar>;
constexpr int W = P::kWidth;

// Row update crow[0:n] (+)= sum_p coef(p) * B[p, 0:n], where coef(p) is read
// with stride `astride` starting at `acol`. Columns are processed in blocks of
// four registers held across the whole k loop.
inline void row_update(int n, int k, const Scalar* acol, std::size_t astride,
                       const Scalar* b, Scalar* crow, bool accumulate) {
  int j = 0;
  for (; j + 4 * W <= n; j += 4 * W) {
    P::Reg c0 = accumulate ? P::load(crow + j) : P::zero();
    P::Reg c1 = accumulate ? P::load(crow + j + W) : P::zero();
    P::Reg c2 = accumulate ? P::load(crow + j + 2 * W) : P::zero();
    P::Reg c3 = accumulate ? P::load(crow + j + 3 * W) : P::zero();
    for (int p = 0; p < k; ++p) {
      const P::Reg av = P::set1(acol[p * astride]);
      const Scalar* brow = b + static_cast<std::size_t>(p) * n + j;
      c0 = P::fmadd(av, P::load(brow), c0);
      c1 = P::fmadd(av, P::load(brow + W), c1);
      c2 = P::fmadd(av, P::load(brow + 2 * W), c2);
      c3 = P::fmadd(av, P::load(brow + 3 * W), c3);
    }
    P::store(crow + j, c0);
    P::store(crow + j + W, c1);
    P::store(crow + j + 2 * W, c2);
    P::store(crow + j + 3 * W, c3);
  }
  for (; j + W <= n; j += W) {
    P::Reg c0 = accumulate ? P::load(crow + j) : P::zero();
    for (int p = 0; p < k; ++p) {
      c0 = P::fmadd(P::set1(acol[p * astride]),
                    P::load(b + static_cast<std::size_t>(p) * n + j), c0);
    }
    P::store(crow + j, c0);
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
  P::Reg s1 = P::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    s0 = P::fmadd(P::load(x + i), P::load(y + i), s0);
    s1 = P::fmadd(P::load(x + i + W), P::load(y + i + W), s1);
  }
  for (; i + W <= n; i += W) s0 = P::fmadd(P::load(x + i), P::load(y + i), s0);
  Scalar s = P::hsum(P::add(s0, s1));
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

}  // namespace avx2_impl

const KernelTable* avx2_table() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelTable table{Isa::kAvx2, avx2_impl::gemm_nn, avx2_impl::gemm_nt,
                                 avx2_impl::gemm_tn, avx2_impl::dot, avx2_impl::axpy};
  return supported ? &table : nullptr;
}

}  // namespace equiswarm::kernels
