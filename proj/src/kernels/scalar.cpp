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

#include "equiswarm/kernels.hpp"

namespace equiswarm::kernels {
namespace scalar_ref {

void gemm_nn(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    Scalar* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0;
    }
    for (int p = 0; p < k; ++p) {
      const Scalar aip = a[static_cast<std::size_t>(i) * k + p];
      const Scalar* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const Scalar* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const Scalar* brow = b + static_cast<std::size_t>(j) * k;
      Scalar s = 0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      Scalar& out = c[static_cast<std::size_t>(i) * n + j];
      out = accumulate ? out + s : s;
    }
  }
}

void gemm_tn(int m, int n, int k, const Scalar* a, const Scalar* b, Scalar* c,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    Scalar* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0;
    }
    for (int p = 0; p < k; ++p) {
      const Scalar api = a[static_cast<std::size_t>(p) * m + i];
      const Scalar* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

Scalar dot(const Scalar* x, const Scalar* y, std::size_t n) {
  Scalar s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar_ref

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, scalar_ref::gemm_nn, scalar_ref::gemm_nt,
                                 scalar_ref::gemm_tn, scalar_ref::dot, scalar_ref::axpy};
  return table;
}

}  // namespace equiswarm::kernels
