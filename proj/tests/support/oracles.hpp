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


// Reference implementations used as independent oracles in tests. They are
// written for clarity, not speed, and share no code with the library.

#ifndef DGNET_TESTS_SUPPORT_ORACLES_HPP_
#define DGNET_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "dgnet/rng.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet::oracle {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Central differences of a scalar function of `x`, one coordinate at a time.
inline std::vector<double> fd_gradient(const std::function<double(const Tensor&)>& f,
                                       const Tensor& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double up = f(probe);
    probe[i] = keep - h;
    const double down = f(probe);
    probe[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline double max_rel_error(std::span<const double> a, std::span<const double> n,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_error(a[i], n[i], floor));
  return worst;
}

// C = op(A) op(B) with A, B, C row-major and explicit leading dimensions.
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, std::size_t lda, const double* b, std::size_t ldb,
                 double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * lda + i] : a[i * lda + p];
        const double bv = tb ? b[j * ldb + p] : b[p * ldb + j];
        s += static_cast<long double>(av) * bv;
      }
      c[i * ldc + j] = static_cast<double>(accumulate ? c[i * ldc + j] + s : s);
    }
  }
}

// [m x k] x [k x n] on rank-2 tensors.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), a.dim(1), b.raw(), b.dim(1),
       c.raw(), b.dim(1), false);
  return c;
}

// Brute-force neighbor selection: full pairwise distance list, sorted by
// (distance, index). Distances are squared Euclidean in long double.
inline long double sq_dist(const double* x, const double* y, std::size_t c) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < c; ++i) {
    const long double d = static_cast<long double>(x[i]) - y[i];
    s += d * d;
  }
  return s;
}

inline std::vector<std::vector<int>> knn_spatial(const Tensor& x, std::size_t k,
                                                 bool include_self) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<std::vector<int>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<long double, int>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (!include_self && j == i) continue;
      all.push_back({sq_dist(x.raw() + i * c, x.raw() + j * c, c), static_cast<int>(j)});
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out[i].push_back(all[r].second);
  }
  return out;
}

// Motion-similarity neighbors; with include_self the joint itself comes first.
inline std::vector<std::vector<int>> knn_temporal(const Tensor& xt, const Tensor& xa,
                                                  std::size_t k, bool include_self) {
  const std::size_t n = xt.dim(0), c = xt.dim(1);
  std::vector<double> motion(n * c);
  for (std::size_t i = 0; i < n * c; ++i) motion[i] = xa[i] - xt[i];
  std::vector<std::vector<int>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<long double, int>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      all.push_back({sq_dist(motion.data() + i * c, motion.data() + j * c, c),
                     static_cast<int>(j)});
    }
    std::sort(all.begin(), all.end());
    if (include_self) out[i].push_back(static_cast<int>(i));
    for (std::size_t r = 0; out[i].size() < k && r < all.size(); ++r) {
      out[i].push_back(all[r].second);
    }
  }
  return out;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace dgnet::oracle

#endif  // DGNET_TESTS_SUPPORT_ORACLES_HPP_
