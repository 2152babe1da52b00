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

#include <random>
#include <vector>

#include "doctest.h"
#include "equiswarm/kernels.hpp"
#include "support.hpp"

using namespace equiswarm;
namespace k = equiswarm::kernels;

namespace {

std::vector<const k::KernelTable*> variants() {
  std::vector<const k::KernelTable*> v{&k::scalar_table()};
  if (auto* t = k::avx2_table()) v.push_back(t);
  if (auto* t = k::neon_table()) v.push_back(t);
  return v;
}

std::vector<Scalar> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Scalar> v(n);
  for (auto& x : v) x = static_cast<Scalar>(u(rng));
  return v;
}

double max_diff(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

const double kTol = test::kDouble ? 1e-12 : 1e-4;

}  // namespace

TEST_CASE("every SIMD variant matches the scalar reference on gemm, dot and axpy") {
  std::mt19937_64 rng(3);
  const auto& ref = k::scalar_table();
  const int sizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 67};
  for (const auto* t : variants()) {
    CAPTURE(k::isa_name(t->isa));
    for (int m : {1, 3, 8, 13}) {
      for (int n : sizes) {
        for (int kk : {1, 2, 5, 16, 37}) {
          const auto a = random_vec(static_cast<std::size_t>(m * kk), rng);
          const auto b = random_vec(static_cast<std::size_t>(kk * n), rng);
          const auto bt = random_vec(static_cast<std::size_t>(n * kk), rng);
          const auto at = random_vec(static_cast<std::size_t>(kk * m), rng);
          const auto c0 = random_vec(static_cast<std::size_t>(m * n), rng);
          for (bool acc : {false, true}) {
            auto c1 = c0, c2 = c0;
            ref.gemm_nn(m, n, kk, a.data(), b.data(), c1.data(), acc);
            t->gemm_nn(m, n, kk, a.data(), b.data(), c2.data(), acc);
            CHECK(max_diff(c1, c2) <= kTol * kk);
            c1 = c0, c2 = c0;
            ref.gemm_nt(m, n, kk, a.data(), bt.data(), c1.data(), acc);
            t->gemm_nt(m, n, kk, a.data(), bt.data(), c2.data(), acc);
            CHECK(max_diff(c1, c2) <= kTol * kk);
            c1 = c0, c2 = c0;
            ref.gemm_tn(m, n, kk, at.data(), b.data(), c1.data(), acc);
            t->gemm_tn(m, n, kk, at.data(), b.data(), c2.data(), acc);
            CHECK(max_diff(c1, c2) <= kTol * kk);
          }
        }
      }
    }
    for (int n : sizes) {
      const auto x = random_vec(static_cast<std::size_t>(n), rng);
      auto y1 = random_vec(static_cast<std::size_t>(n), rng);
      auto y2 = y1;
      CHECK(std::abs(double(ref.dot(x.data(), y1.data(), x.size())) -
                     double(t->dot(x.data(), y1.data(), x.size()))) <= kTol * n);
      ref.axpy(Scalar(0.37), x.data(), y1.data(), x.size());
      t->axpy(Scalar(0.37), x.data(), y2.data(), x.size());
      CHECK(max_diff(y1, y2) <= kTol);
    }
  }
}

TEST_CASE("the scalar reference agrees with a naive triple loop") {
  const std::vector<Scalar> a{1, 2, 3, 4, 5, 6};    // 2x3
  const std::vector<Scalar> b{7, 8, 9, 10, 11, 12}; // 3x2
  std::vector<Scalar> c(4);
  k::scalar_table().gemm_nn(2, 2, 3, a.data(), b.data(), c.data(), false);
  CHECK(c == std::vector<Scalar>{58, 64, 139, 154});
}

TEST_CASE("force_isa switches the process-wide table and falls back to scalar") {
  const k::Isa before = k::active().isa;
  k::force_isa(k::Isa::kScalar);
  CHECK(k::active().isa == k::Isa::kScalar);
  k::force_isa(k::Isa::kNeon);
  CHECK(k::active().isa == (k::neon_table() ? k::Isa::kNeon : k::Isa::kScalar));
  k::force_isa(before);
  CHECK(k::active().isa == before);
}
