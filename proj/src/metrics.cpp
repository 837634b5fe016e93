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

#include "dgnet/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dgnet/error.hpp"

namespace dgnet {
namespace {

std::size_t check_pair(const Tensor& pred, const Tensor& gt, const char* what) {
  if (pred.shape() != gt.shape()) {
    throw DimensionError(std::string(what) + ": shape " +
                         shape_string(pred.shape()) + " vs " +
                         shape_string(gt.shape()));
  }
  if (pred.rank() < 2 || pred.shape().back() != 3 || pred.size() == 0) {
    throw DimensionError(std::string(what) + ": expected [.. x N x 3], got " +
                         shape_string(pred.shape()));
  }
  return pred.size() / 3;
}

std::vector<double> joint_errors(const Tensor& pred, const Tensor& gt) {
  const std::size_t n = pred.size() / 3;
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pred[3 * i] - gt[3 * i];
    const double dy = pred[3 * i + 1] - gt[3 * i + 1];
    const double dz = pred[3 * i + 2] - gt[3 * i + 2];
    e[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return e;
}

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

}  // namespace

double mpjpe(const Tensor& pred, const Tensor& gt) {
  const std::size_t n = check_pair(pred, gt, "mpjpe");
  double s = 0.0;
  for (double e : joint_errors(pred, gt)) s += e;
  return s / static_cast<double>(n);
}

Tensor procrustes_align(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "procrustes");
  const std::size_t n = pred.shape()[pred.rank() - 2];
  if (n < 3) throw DimensionError("procrustes: need at least 3 joints");
  const std::size_t frames = pred.size() / (3 * n);
  Tensor out(pred.shape());
  for (std::size_t f = 0; f < frames; ++f) {
    const Eigen::Map<const Points> y(pred.raw() + f * n * 3,
                                     static_cast<Eigen::Index>(n), 3);
    const Eigen::Map<const Points> x(gt.raw() + f * n * 3,
                                     static_cast<Eigen::Index>(n), 3);
    const Eigen::RowVector3d mx = x.colwise().mean(), my = y.colwise().mean();
    const Points x0 = x.rowwise() - mx;
    const Points y0 = y.rowwise() - my;

    const Eigen::JacobiSVD<Eigen::Matrix3d> spread(x0.transpose() * x0);
    const Eigen::Vector3d sv = spread.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
      throw NumericError("procrustes: ground-truth frame " + std::to_string(f) +
                         " is degenerate (collinear joints)");
    }

    const Eigen::Matrix3d cov = x0.transpose() * y0;
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0);
    const Eigen::Matrix3d r = u * d.asDiagonal() * v.transpose();
    const double norm_y = y0.squaredNorm();
    const double s = norm_y > 0.0 ? svd.singularValues().dot(d) / norm_y : 0.0;

    Eigen::Map<Points> a(out.raw() + f * n * 3, static_cast<Eigen::Index>(n), 3);
    a = (s * (y0 * r.transpose())).rowwise() + mx;
  }
  return out;
}

double procrustes_mpjpe(const Tensor& pred, const Tensor& gt) {
  return mpjpe(procrustes_align(pred, gt), gt);
}

PckResult pck_auc(const Tensor& pred, const Tensor& gt, const PckOptions& opts) {
  const std::size_t n = check_pair(pred, gt, "pck");
  if (opts.auc_steps < 2 || !(opts.auc_max > 0.0) || !(opts.threshold >= 0.0)) {
    throw ConfigError("pck: need auc_steps >= 2, auc_max > 0, threshold >= 0");
  }
  const std::vector<double> e = joint_errors(pred, gt);
  auto fraction = [&](double thr) {
    std::size_t c = 0;
    for (double v : e) c += (v <= thr);
    return static_cast<double>(c) / static_cast<double>(n);
  };
  PckResult r;
  r.pck = fraction(opts.threshold);
  double acc = 0.0;
  for (std::size_t k = 0; k < opts.auc_steps; ++k) {
    acc += fraction(opts.auc_max * static_cast<double>(k) /
                    static_cast<double>(opts.auc_steps - 1));
  }
  r.auc = acc / static_cast<double>(opts.auc_steps);
  return r;
}

}  // namespace dgnet
