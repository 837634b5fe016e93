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

// Joint affinities: the fixed skeleton matrix, KNN-selected dynamical
// supports for the spatial and temporal cases, the weighting heads that turn
// a support into weights, and the alternative connection styles.
//
// Every affinity is split into a discrete support (a NeighborTable, computed
// from plain values and therefore constant for differentiation) and the
// weights on that support, which are tape operations.

#ifndef DGNET_AFFINITY_HPP_
#define DGNET_AFFINITY_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dgnet/autodiff.hpp"
#include "dgnet/neighbors.hpp"
#include "dgnet/params.hpp"
#include "dgnet/rng.hpp"
#include "dgnet/skeleton.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet {

enum class AffinityKind {
  kFixedSpatial,
  kDynamicalSpatial,
  kFixedTemporalForward,
  kFixedTemporalBackward,
  kDynamicalTemporalForward,
  kDynamicalTemporalBackward,
  kFull,
  kRandom,
  kSymmetry,
  kPrecomputed,
};
const char* to_string(AffinityKind kind);

struct AffinityMatrix {
  Tensor values;  // [N x N]
  AffinityKind kind;
};

enum class TemporalDirection { kForward, kBackward };

struct Neighbor {
  int index;
  double distance;
};

// Per joint, the selected neighbors in selection order.
struct NeighborSet {
  std::size_t k = 0;
  std::vector<std::vector<Neighbor>> lists;

  std::vector<int> indices(std::size_t joint) const;
};

// K nearest joints of each joint by Euclidean feature distance, ordered by
// (distance, index). Self is excluded unless `include_self`.
NeighborSet knn_spatial(const Tensor& features, std::size_t k,
                        bool include_self = false);
// K joints whose motion vector (features_adj - features_t) is closest to
// joint i's. With `include_self` joint i itself is always selected first (its
// distance is 0); the rest follow by (distance, index).
NeighborSet knn_temporal(const Tensor& features_t, const Tensor& features_adj,
                         std::size_t k, bool include_self = true);

// Batched forms over [F, N, C] features.
NeighborTable knn_spatial_table(const Tensor& features, std::size_t k,
                                bool include_self = false);
NeighborTable knn_temporal_table(const Tensor& features_t,
                                 const Tensor& features_adj, std::size_t k,
                                 bool include_self = true);

enum class HeadActivation {
  kSigmoid,
  kIdentity,
  kEmbeddedGaussian,
  kUnweighted,  // binary support, no learned weights
};
const char* to_string(HeadActivation a);
HeadActivation parse_head_activation(const std::string& s);

// Scores a joint pair (i, j) from [x_i || x_j]. The fully connected kinds use
// weight [2C x 1] and bias [1]; the embedded gaussian kind uses projections
// theta, phi [C x C'] and a softmax over the selected columns of each row.
struct WeightingHead {
  HeadActivation activation = HeadActivation::kSigmoid;
  std::size_t channels = 0;
  Tensor weight;
  Tensor bias;
  Tensor theta;
  Tensor phi;

  // Uniform(+-1/sqrt(fan_in)) weights and zero bias; all zeros without rng.
  static WeightingHead make(HeadActivation activation, std::size_t channels,
                            Rng* rng);
  void collect(ParamList& out);
};

// Weights [F, N, K] of the selected pairs. Rows come from x_row, columns from
// x_col; both are [F, N, C]. Empty slots carry weight 0.
Var pair_weights(ParamBinder& params, const WeightingHead& head,
                 const Var& x_row, const Var& x_col,
                 const std::shared_ptr<const NeighborTable>& support);

// Skeleton affinity: binary adjacency, optionally with self-loops and
// row normalization.
AffinityMatrix build_fixed_spatial(const SkeletonGraph& skeleton,
                                   bool self_loops = true,
                                   bool row_normalize = true);
AffinityMatrix build_fixed_temporal(std::size_t joints,
                                    TemporalDirection direction);
AffinityMatrix build_dynamical_spatial(const Tensor& features, std::size_t k,
                                       const WeightingHead& head,
                                       bool include_self = false);
AffinityMatrix build_dynamical_temporal(const Tensor& features_t,
                                        const Tensor& features_adj,
                                        std::size_t k,
                                        const WeightingHead& head,
                                        TemporalDirection direction,
                                        bool include_self = true);

// ---- Supports for the connection styles -----------------------------------

enum class ConnectionStyle {
  kDynamical,
  kFixed,
  kFull,
  kRandom,
  kSymmetry,
  kPrecomputed,
};
const char* to_string(ConnectionStyle s);
ConnectionStyle parse_connection_style(const std::string& s);

// Single-frame tables ([1, N, width]).
NeighborTable skeleton_support(const SkeletonGraph& skeleton);
NeighborTable symmetry_spatial_support(const SkeletonGraph& skeleton);
NeighborTable symmetry_temporal_support(const SkeletonGraph& skeleton);
NeighborTable full_support(std::size_t joints, bool include_self);
NeighborTable identity_support(std::size_t joints);
NeighborTable random_support(std::size_t joints, std::size_t k,
                             bool include_self, Rng& rng);
// Repeats a single-frame table over `frames` frames.
NeighborTable repeat_frames(const NeighborTable& single, std::size_t frames);

// Everything a non-dynamical spatial style may need.
struct AblationContext {
  const SkeletonGraph* skeleton = nullptr;
  Tensor features;        // [N x C], input to the weighting head
  Tensor pose2d;          // [N x 2], for the precomputed style
  std::uint64_t seed = 0;  // for the random style
  std::size_t k = 3;
  const WeightingHead* head = nullptr;
};

// Spatial affinity of one frame under `style`, weighted by ctx.head.
AffinityMatrix build_ablation_affinity(ConnectionStyle style,
                                       const AblationContext& ctx);

// Dense [F, N, N] affinity values from a support and pair weights. A thin
// wrapper over scatter_pairs, kept for symmetry with pair_weights.
Var assemble_affinity(const Var& weights,
                      const std::shared_ptr<const NeighborTable>& support);

}  // namespace dgnet

#endif  // DGNET_AFFINITY_HPP_
