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

// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after cpu_supports(Isa::kAvx2) returned true.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "avx2_table.hpp"
#include "dgnet/kernels.hpp"

namespace dgnet::kernels::avx2 {

double dot(const double* x, const double* y, std::size_t n);

namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 8;
constexpr std::size_t kSmallK = 64;
constexpr std::size_t kSmallWork = 32 * 32 * 32;

// C tile (6 x 8) = packed A panel [k x 6] times packed B panel [k x 8]. Both
// panels are contiguous, so the loop streams memory. 12 accumulators, two B
// vectors and one broadcast fill 15 of the 16 ymm registers.
inline void micro_6x8(std::size_t k, const double* ap, const double* bp,
                      double* c, std::size_t ldc, bool accumulate) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
  __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p, ap += kMr, bp += kNr) {
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(ap);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(ap + 1);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(ap + 2);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(ap + 3);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
    av = _mm256_broadcast_sd(ap + 4);
    c40 = _mm256_fmadd_pd(av, b0, c40);
    c41 = _mm256_fmadd_pd(av, b1, c41);
    av = _mm256_broadcast_sd(ap + 5);
    c50 = _mm256_fmadd_pd(av, b0, c50);
    c51 = _mm256_fmadd_pd(av, b1, c51);
  }
  const __m256d acc[kMr][2] = {{c00, c01}, {c10, c11}, {c20, c21},
                               {c30, c31}, {c40, c41}, {c50, c51}};
  for (std::size_t r = 0; r < kMr; ++r) {
    double* row = c + r * ldc;
    for (std::size_t h = 0; h < 2; ++h) {
      __m256d v = acc[r][h];
      if (accumulate) v = _mm256_add_pd(v, _mm256_loadu_pd(row + 4 * h));
      _mm256_storeu_pd(row + 4 * h, v);
    }
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Unpacked product for small problems, where packing costs more than it saves.
void gemm_small(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                std::size_t k, const double* a, std::size_t lda, const double* b,
                std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  alignas(32) double arow[kSmallK];
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      arow[p] = trans_a ? a[p * lda + i] : a[i * lda + p];
    }
    double* crow = c + i * ldc;
    if (trans_b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = dot(arow, b + j * ldb, k);
        crow[j] = accumulate ? crow[j] + d : d;
      }
      continue;
    }
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(arow + p);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), c1);
      }
      if (accumulate) {
        c0 = _mm256_add_pd(c0, _mm256_loadu_pd(crow + j));
        c1 = _mm256_add_pd(c1, _mm256_loadu_pd(crow + j + 4));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p),
                             _mm256_loadu_pd(b + p * ldb + j), c0);
      }
      if (accumulate) c0 = _mm256_add_pd(c0, _mm256_loadu_pd(crow + j));
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double d = 0.0;
      for (std::size_t p = 0; p < k; ++p) d += arow[p] * b[p * ldb + j];
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
      }
    }
    return;
  }
  if (k <= kSmallK && m * n * k <= kSmallWork) {
    gemm_small(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  // op(B) packed into zero-padded column panels [k x 8], op(A) into row
  // panels [k x 6]. Edge tiles go through a scratch tile.
  thread_local std::vector<double> pb, pa;
  const std::size_t panels = (n + kNr - 1) / kNr;
  pb.resize(panels * k * kNr);
  for (std::size_t q = 0; q < panels; ++q) {
    const std::size_t j0 = q * kNr, w = std::min(kNr, n - j0);
    double* dst = pb.data() + q * k * kNr;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t jj = 0; jj < w; ++jj) {
        dst[p * kNr + jj] = trans_b ? b[(j0 + jj) * ldb + p] : b[p * ldb + j0 + jj];
      }
      for (std::size_t jj = w; jj < kNr; ++jj) dst[p * kNr + jj] = 0.0;
    }
  }
  pa.resize(k * kMr);
  alignas(32) double tile[kMr * kNr];
  for (std::size_t i0 = 0; i0 < m; i0 += kMr) {
    const std::size_t h = std::min(kMr, m - i0);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t r = 0; r < kMr; ++r) {
        pa[p * kMr + r] =
            r < h ? (trans_a ? a[p * lda + i0 + r] : a[(i0 + r) * lda + p]) : 0.0;
      }
    }
    for (std::size_t q = 0; q < panels; ++q) {
      const std::size_t j0 = q * kNr, w = std::min(kNr, n - j0);
      const double* bpanel = pb.data() + q * k * kNr;
      if (h == kMr && w == kNr) {
        micro_6x8(k, pa.data(), bpanel, c + i0 * ldc + j0, ldc, accumulate);
        continue;
      }
      micro_6x8(k, pa.data(), bpanel, tile, kNr, false);
      for (std::size_t r = 0; r < h; ++r) {
        double* row = c + (i0 + r) * ldc + j0;
        for (std::size_t jj = 0; jj < w; ++jj) {
          row[jj] = accumulate ? row[jj] + tile[r * kNr + jj] : tile[r * kNr + jj];
        }
      }
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

const KernelTable& table() {
  static const KernelTable t{Isa::kAvx2, "avx2", &gemm, &dot, &squared_distance,
                             &axpy};
  return t;
}

}  // namespace dgnet::kernels::avx2
