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


#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dgnet/error.hpp"
#include "dgnet/metrics.hpp"
#include "oracles.hpp"

namespace dgnet {
namespace {

// Rotation matrix from a random unit quaternion.
std::array<double, 9> random_rotation(Rng& rng) {
  double q[4];
  double n2 = 0.0;
  for (double& v : q) {
    v = rng.normal();
    n2 += v * v;
  }
  const double s = 1.0 / std::sqrt(n2);
  const double w = q[0] * s, x = q[1] * s, y = q[2] * s, z = q[3] * s;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

Tensor transform(const Tensor& pose, const std::array<double, 9>& r, double scale,
                 const double t[3]) {
  Tensor out(pose.shape());
  for (std::size_t p = 0; p < pose.size() / 3; ++p) {
    for (std::size_t i = 0; i < 3; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < 3; ++j) v += r[3 * i + j] * pose[3 * p + j];
      out[3 * p + i] = scale * v + t[i];
    }
  }
  return out;
}

double loop_mpjpe(const Tensor& a, const Tensor& b) {
  long double s = 0.0L;
  const std::size_t points = a.size() / 3;
  for (std::size_t p = 0; p < points; ++p) {
    long double d2 = 0.0L;
    for (std::size_t d = 0; d < 3; ++d) {
      const long double e = static_cast<long double>(a[3 * p + d]) - b[3 * p + d];
      d2 += e * e;
    }
    s += std::sqrt(d2);
  }
  return static_cast<double>(s / points);
}

TEST(Mpjpe, Examples) {
  Rng rng(1);
  const Tensor gt = oracle::random_tensor({17, 3}, rng, -500, 500);
  EXPECT_EQ(mpjpe(gt, gt), 0.0);
  Tensor off = gt;
  for (std::size_t j = 0; j < 17; ++j) {
    off[3 * j] += 3.0;
    off[3 * j + 2] += 4.0;
  }
  EXPECT_NEAR(mpjpe(off, gt), 5.0, 1e-12);
  const Tensor pred = oracle::random_tensor({4, 17, 3}, rng, -500, 500);
  const Tensor gt4 = oracle::random_tensor({4, 17, 3}, rng, -500, 500);
  EXPECT_NEAR(mpjpe(pred, gt4), loop_mpjpe(pred, gt4), 1e-12 * loop_mpjpe(pred, gt4));
  EXPECT_THROW(mpjpe(pred, gt), DimensionError);
  EXPECT_THROW(mpjpe(Tensor({4, 2}), Tensor({4, 2})), DimensionError);
}

TEST(Mpjpe, InvariantUnderConsistentJointPermutation) {
  Rng rng(2);
  const Tensor a = oracle::random_tensor({17, 3}, rng), b = oracle::random_tensor({17, 3}, rng);
  std::vector<int> perm(17);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor pa({17, 3}), pb({17, 3});
  for (std::size_t j = 0; j < 17; ++j) {
    for (std::size_t d = 0; d < 3; ++d) {
      pa.at(j, d) = a.at(perm[j], d);
      pb.at(j, d) = b.at(perm[j], d);
    }
  }
  EXPECT_NEAR(mpjpe(pa, pb), mpjpe(a, b), 1e-12);
}

TEST(Procrustes, RemovesSimilarityTransforms) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor gt = oracle::random_tensor({17, 3}, rng, -500, 500);
    const double t[3] = {rng.uniform(-900, 900), rng.uniform(-900, 900), rng.uniform(-900, 900)};
    const Tensor pred = transform(gt, random_rotation(rng), rng.uniform(0.3, 3.0), t);
    EXPECT_LT(procrustes_mpjpe(pred, gt), 1e-9);
  }
  const Tensor gt = oracle::random_tensor({17, 3}, rng);
  EXPECT_LT(procrustes_mpjpe(gt, gt), 1e-12);
}

double squared_error(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

TEST(Procrustes, AlignedSquaredErrorNeverExceedsRaw) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor gt = oracle::random_tensor({17, 3}, rng, -500, 500);
    Tensor pred = oracle::random_tensor({17, 3}, rng, -500, 500);
    if (trial % 2) {
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = gt[i] + 0.1 * pred[i];
    }
    ASSERT_LE(squared_error(procrustes_align(pred, gt), gt), squared_error(pred, gt) * (1 + 1e-12))
        << trial;
  }
}

// Least squares is not least mean distance: a pair where alignment lowers the
// squared error but raises the mean per-joint distance.
TEST(Procrustes, MeanDistanceCanRiseAfterAlignment) {
  Rng rng(88);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor gt = oracle::random_tensor({17, 3}, rng, -800.0, 800.0);
    Tensor pred = oracle::random_tensor({17, 3}, rng, -800.0, 800.0);
    if (trial % 2) {
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = gt[i] + 0.1 * pred[i];
    }
    if (trial != 635) continue;
    EXPECT_LT(squared_error(procrustes_align(pred, gt), gt), squared_error(pred, gt));
    EXPECT_GT(procrustes_mpjpe(pred, gt), mpjpe(pred, gt));
  }
}

TEST(Procrustes, InvariantToTransformingThePrediction) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor gt = oracle::random_tensor({17, 3}, rng, -500, 500);
    const Tensor pred = oracle::random_tensor({17, 3}, rng, -500, 500);
    const double t[3] = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const Tensor moved = transform(pred, random_rotation(rng), rng.uniform(0.5, 2.0), t);
    EXPECT_NEAR(procrustes_mpjpe(moved, gt), procrustes_mpjpe(pred, gt), 1e-8);
  }
}

TEST(Procrustes, AlignmentIsLocallyOptimal) {
  // Nudging the aligned pose by small rotations or scalings never helps.
  Rng rng(6);
  const double zero[3] = {0, 0, 0};
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor gt = oracle::random_tensor({17, 3}, rng, -500, 500);
    const Tensor pred = oracle::random_tensor({17, 3}, rng, -500, 500);
    const Tensor aligned = procrustes_align(pred, gt);
    // Squared error is what the alignment minimizes.
    auto sse = [&](const Tensor& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - gt[i]) * (p[i] - gt[i]);
      return s;
    };
    const double best = sse(aligned);
    double centroid[3] = {0, 0, 0};
    for (std::size_t j = 0; j < 17; ++j) {
      for (std::size_t d = 0; d < 3; ++d) centroid[d] += aligned.at(j, d) / 17.0;
    }
    for (int probe = 0; probe < 20; ++probe) {
      const double angle = 1e-3, ax = rng.normal(), ay = rng.normal(), az = rng.normal();
      const double n = std::sqrt(ax * ax + ay * ay + az * az);
      const double kx = ax / n, ky = ay / n, kz = az / n;
      const double c = std::cos(angle), s = std::sin(angle), v = 1 - c;
      const std::array<double, 9> r{kx * kx * v + c,      kx * ky * v - kz * s, kx * kz * v + ky * s,
                                    ky * kx * v + kz * s, ky * ky * v + c,      ky * kz * v - kx * s,
                                    kz * kx * v - ky * s, kz * ky * v + kx * s, kz * kz * v + c};
      Tensor centered = aligned;
      for (std::size_t j = 0; j < 17; ++j) {
        for (std::size_t d = 0; d < 3; ++d) centered.at(j, d) -= centroid[d];
      }
      Tensor nudged = transform(centered, r, 1.0 + rng.uniform(-1e-3, 1e-3), zero);
      for (std::size_t j = 0; j < 17; ++j) {
        for (std::size_t d = 0; d < 3; ++d) nudged.at(j, d) += centroid[d];
      }
      EXPECT_GE(sse(nudged), best * (1 - 1e-12));
    }
  }
}

TEST(Procrustes, CollinearGroundTruthIsSingular) {
  Tensor gt({5, 3});
  for (std::size_t j = 0; j < 5; ++j) gt.at(j, 0) = double(j);
  Rng rng(7);
  EXPECT_THROW(procrustes_mpjpe(oracle::random_tensor({5, 3}, rng), gt), NumericError);
  EXPECT_THROW(procrustes_mpjpe(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(PckAuc, Examples) {
  Rng rng(8);
  const Tensor gt = oracle::random_tensor({16, 3}, rng, -500, 500);
  const PckResult same = pck_auc(gt, gt);
  EXPECT_EQ(same.pck, 1.0);
  EXPECT_EQ(same.auc, 1.0);
  Tensor far = gt, half = gt;
  for (std::size_t j = 0; j < 16; ++j) far.at(j, 0) += 151.0;
  EXPECT_EQ(pck_auc(far, gt).pck, 0.0);
  for (std::size_t j = 0; j < 8; ++j) half.at(j, 1) += 200.0;
  EXPECT_EQ(pck_auc(half, gt).pck, 0.5);
  // Errors of 0 and 200 mm: half the joints pass every grid threshold.
  EXPECT_DOUBLE_EQ(pck_auc(half, gt).auc, 0.5);
  EXPECT_THROW(pck_auc(gt, gt, {150.0, 150.0, 1}), ConfigError);
}

TEST(PckAuc, AucIsTheMeanOverTheThresholdGrid) {
  Rng rng(9);
  const Tensor gt = oracle::random_tensor({3, 17, 3}, rng, -500, 500);
  const Tensor pred = oracle::random_tensor({3, 17, 3}, rng, -500, 500);
  Tensor pred_near = gt;
  for (std::size_t i = 0; i < gt.size(); ++i) pred_near[i] += (pred[i] - gt[i]) * 0.15;
  std::vector<double> err;
  for (std::size_t p = 0; p < gt.size() / 3; ++p) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      d2 += (pred_near[3 * p + d] - gt[3 * p + d]) * (pred_near[3 * p + d] - gt[3 * p + d]);
    }
    err.push_back(std::sqrt(d2));
  }
  double auc = 0.0;
  for (int s = 0; s < 31; ++s) {
    const double thr = 150.0 * s / 30.0;
    double hit = 0.0;
    for (double e : err) hit += e <= thr;
    auc += hit / err.size();
  }
  const PckResult r = pck_auc(pred_near, gt);
  EXPECT_NEAR(r.auc, auc / 31.0, 1e-12);
  EXPECT_GE(r.pck, 0.0);
  EXPECT_LE(r.pck, 1.0);
}

}  // namespace
}  // namespace dgnet
