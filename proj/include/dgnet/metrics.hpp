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

// Pose error metrics. Poses are [.. x N x 3] in millimeters; leading
// dimensions index frames and are averaged over.

#ifndef DGNET_METRICS_HPP_
#define DGNET_METRICS_HPP_

#include "dgnet/tensor.hpp"

namespace dgnet {

// Mean per-joint Euclidean distance.
double mpjpe(const Tensor& pred, const Tensor& gt);

// MPJPE after aligning each frame of `pred` to `gt` with the best rotation
// (det = +1), translation and positive scale. Throws NumericError when a gt
// frame is collinear.
double procrustes_mpjpe(const Tensor& pred, const Tensor& gt);
// `pred` aligned to `gt`, frame by frame.
Tensor procrustes_align(const Tensor& pred, const Tensor& gt);

struct PckOptions {
  double threshold = 150.0;
  double auc_max = 150.0;
  std::size_t auc_steps = 31;
};

struct PckResult {
  double pck = 0.0;
  double auc = 0.0;
};

// A joint counts as correct when its error is at most the threshold. The AUC
// is the mean PCK over auc_steps thresholds evenly spaced in [0, auc_max].
PckResult pck_auc(const Tensor& pred, const Tensor& gt, const PckOptions& opts = {});

}  // namespace dgnet

#endif  // DGNET_METRICS_HPP_
