// Copyright 2026 The dgnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Inner-loop arithmetic kernels.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is picked once at startup from CPUID; the
// DGNET_KERNELS environment variable ("scalar" or "avx2") overrides the choice
// and select() switches it at runtime (tests use this to compare the two).
//
// Matrices are row-major with explicit leading dimensions.

#ifndef DGNET_KERNELS_HPP_
#define DGNET_KERNELS_HPP_

#include <cstddef>
#include <string_view>

namespace dgnet::kernels {

enum class Isa { kScalar, kAvx2 };

// C[m x n] = op(A)[m x k] * op(B)[k x n], or C += ... when accumulate is set.
// op(A) = A^T when trans_a (A is then stored k x m).
using GemmFn = void (*)(bool trans_a, bool trans_b, std::size_t m,
                        std::size_t n, std::size_t k, const double* a,
                        std::size_t lda, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc, bool accumulate);
using DotFn = double (*)(const double* x, const double* y, std::size_t n);
using SquaredDistanceFn = double (*)(const double* x, const double* y,
                                     std::size_t n);
// y += alpha * x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x,
                        double* y);

struct KernelTable {
  Isa isa;
  std::string_view name;
  GemmFn gemm;
  DotFn dot;
  SquaredDistanceFn squared_distance;
  AxpyFn axpy;
};

const KernelTable& scalar_table();
// nullptr when the AVX2 translation unit was not built for this target.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);
const KernelTable& table_for(Isa isa);

const KernelTable& active();
// Throws ConfigError when the ISA is not available on this machine.
void select(Isa isa);
Isa parse_isa(std::string_view name);

inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc,
                 bool accumulate) {
  active().gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline double squared_distance(const double* x, const double* y,
                               std::size_t n) {
  return active().squared_distance(x, y, n);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active().axpy(n, alpha, x, y);
}

namespace scalar {
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
double dot(const double* x, const double* y, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace scalar

}  // namespace dgnet::kernels

#endif  // DGNET_KERNELS_HPP_
