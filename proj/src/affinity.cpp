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

#include "dgnet/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dgnet/error.hpp"
#include "dgnet/kernels.hpp"

namespace dgnet {
namespace {

// Time-ordered candidate with its squared distance.
struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

void check_features(const Tensor& x, const char* what) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError(std::string(what) + ": features must be [N x C] or "
                         "[F x N x C], got " + shape_string(x.shape()));
  }
}

// Selects for one frame. `rows` points at N rows of C features.
void select_frame(const double* rows, std::size_t n, std::size_t c,
                  std::size_t k, bool include_self, bool self_first,
                  std::int32_t* out, double* out_d2) {
  std::vector<Candidate> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i && (!include_self || self_first)) continue;
      cand.push_back({kernels::squared_distance(rows + i * c, rows + j * c, c),
                      static_cast<int>(j)});
    }
    std::size_t slot = 0;
    if (include_self && self_first) {
      out[i * k] = static_cast<std::int32_t>(i);
      if (out_d2) out_d2[i * k] = 0.0;
      slot = 1;
    }
    const std::size_t need = k - slot;
    std::partial_sort(cand.begin(), cand.begin() + need, cand.end());
    for (std::size_t s = 0; s < need; ++s) {
      out[i * k + slot + s] = cand[s].index;
      if (out_d2) out_d2[i * k + slot + s] = cand[s].d2;
    }
  }
}

void check_k(std::size_t k, std::size_t n, bool include_self, const char* what) {
  const std::size_t limit = include_self ? n : n - 1;
  if (k == 0 || k > limit) {
    throw ConfigError(std::string(what) + ": K=" + std::to_string(k) +
                      " must be in [1, " + std::to_string(limit) + "] for N=" +
                      std::to_string(n) + (include_self ? " (self included)"
                                                        : " (self excluded)"));
  }
}

NeighborSet to_set(const std::vector<std::int32_t>& idx,
                   const std::vector<double>& d2, std::size_t n, std::size_t k) {
  NeighborSet s;
  s.k = k;
  s.lists.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < k; ++m) {
      s.lists[i].push_back({idx[i * k + m], std::sqrt(d2[i * k + m])});
    }
  }
  return s;
}

Tensor motion(const Tensor& from, const Tensor& to, const char* what) {
  if (from.shape() != to.shape()) {
    throw DimensionError(std::string(what) + ": shapes " +
                         shape_string(from.shape()) + " and " +
                         shape_string(to.shape()) + " differ");
  }
  Tensor m(from.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = to[i] - from[i];
  return m;
}

Tensor dense_from(const Var& v) {
  const Tensor& t = v.value();
  return t.reshaped({t.dim(1), t.dim(2)});
}

Tensor as_frames(const Tensor& x) {
  return x.rank() == 3 ? x : x.reshaped({1, x.dim(0), x.dim(1)});
}

AffinityMatrix weigh_support(const Tensor& row_features,
                             const Tensor& col_features,
                             std::shared_ptr<const NeighborTable> support,
                             const WeightingHead& head, AffinityKind kind) {
  Tape tape;
  ParamBinder params(tape);
  const Tensor xr = as_frames(row_features);
  const Tensor xc = as_frames(col_features);
  const Var r = tape.view(xr);
  const Var c = tape.view(xc);
  const Var w = pair_weights(params, head, r, c, support);
  return {dense_from(assemble_affinity(w, support)), kind};
}

}  // namespace

const char* to_string(AffinityKind kind) {
  switch (kind) {
    case AffinityKind::kFixedSpatial: return "fixed-spatial";
    case AffinityKind::kDynamicalSpatial: return "dynamical-spatial";
    case AffinityKind::kFixedTemporalForward: return "fixed-temporal-forward";
    case AffinityKind::kFixedTemporalBackward: return "fixed-temporal-backward";
    case AffinityKind::kDynamicalTemporalForward:
      return "dynamical-temporal-forward";
    case AffinityKind::kDynamicalTemporalBackward:
      return "dynamical-temporal-backward";
    case AffinityKind::kFull: return "full";
    case AffinityKind::kRandom: return "random";
    case AffinityKind::kSymmetry: return "symmetry";
    case AffinityKind::kPrecomputed: return "precomputed";
  }
  return "?";
}

std::vector<int> NeighborSet::indices(std::size_t joint) const {
  std::vector<int> out;
  for (const Neighbor& nb : lists.at(joint)) out.push_back(nb.index);
  return out;
}

NeighborTable knn_spatial_table(const Tensor& features, std::size_t k,
                                bool include_self) {
  check_features(features, "knn_spatial");
  const Tensor x = as_frames(features);
  const std::size_t f = x.dim(0), n = x.dim(1), c = x.dim(2);
  check_k(k, n, include_self, "knn_spatial");
  NeighborTable t(f, n, k);
  for (std::size_t fr = 0; fr < f; ++fr) {
    select_frame(x.raw() + fr * n * c, n, c, k, include_self, false,
                 t.index.data() + fr * n * k, nullptr);
  }
  return t;
}

NeighborTable knn_temporal_table(const Tensor& features_t,
                                 const Tensor& features_adj, std::size_t k,
                                 bool include_self) {
  check_features(features_t, "knn_temporal");
  const Tensor m = as_frames(motion(features_t, features_adj, "knn_temporal"));
  const std::size_t f = m.dim(0), n = m.dim(1), c = m.dim(2);
  check_k(k, n, include_self, "knn_temporal");
  NeighborTable t(f, n, k);
  for (std::size_t fr = 0; fr < f; ++fr) {
    select_frame(m.raw() + fr * n * c, n, c, k, include_self, true,
                 t.index.data() + fr * n * k, nullptr);
  }
  return t;
}

NeighborSet knn_spatial(const Tensor& features, std::size_t k,
                        bool include_self) {
  if (features.rank() != 2) {
    throw DimensionError("knn_spatial: features must be [N x C], got " +
                         shape_string(features.shape()));
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  check_k(k, n, include_self, "knn_spatial");
  std::vector<std::int32_t> idx(n * k);
  std::vector<double> d2(n * k);
  select_frame(features.raw(), n, c, k, include_self, false, idx.data(),
               d2.data());
  return to_set(idx, d2, n, k);
}

NeighborSet knn_temporal(const Tensor& features_t, const Tensor& features_adj,
                         std::size_t k, bool include_self) {
  if (features_t.rank() != 2) {
    throw DimensionError("knn_temporal: features must be [N x C], got " +
                         shape_string(features_t.shape()));
  }
  const Tensor m = motion(features_t, features_adj, "knn_temporal");
  const std::size_t n = m.dim(0), c = m.dim(1);
  check_k(k, n, include_self, "knn_temporal");
  std::vector<std::int32_t> idx(n * k);
  std::vector<double> d2(n * k);
  select_frame(m.raw(), n, c, k, include_self, true, idx.data(), d2.data());
  return to_set(idx, d2, n, k);
}

// ---- Weighting heads --------------------------------------------------------

const char* to_string(HeadActivation a) {
  switch (a) {
    case HeadActivation::kSigmoid: return "sigmoid";
    case HeadActivation::kIdentity: return "identity";
    case HeadActivation::kEmbeddedGaussian: return "embedded-gaussian";
    case HeadActivation::kUnweighted: return "none";
  }
  return "?";
}

HeadActivation parse_head_activation(const std::string& s) {
  if (s == "sigmoid" || s == "fc") return HeadActivation::kSigmoid;
  if (s == "identity") return HeadActivation::kIdentity;
  if (s == "embedded-gaussian" || s == "eg") {
    return HeadActivation::kEmbeddedGaussian;
  }
  if (s == "none" || s == "wo") return HeadActivation::kUnweighted;
  throw ConfigError("unknown weighting '" + s +
                    "' (expected sigmoid, identity, embedded-gaussian, none)");
}

WeightingHead WeightingHead::make(HeadActivation activation,
                                  std::size_t channels, Rng* rng) {
  if (channels == 0) throw ConfigError("weighting head needs channels > 0");
  WeightingHead h;
  h.activation = activation;
  h.channels = channels;
  auto fill = [rng](Tensor& t, double bound) {
    if (!rng) return;
    for (double& v : t.data()) v = rng->uniform(-bound, bound);
  };
  switch (activation) {
    case HeadActivation::kSigmoid:
    case HeadActivation::kIdentity:
      h.weight = Tensor({2 * channels, 1});
      h.bias = Tensor({1});
      fill(h.weight, 1.0 / std::sqrt(2.0 * static_cast<double>(channels)));
      break;
    case HeadActivation::kEmbeddedGaussian: {
      const std::size_t inner = std::max<std::size_t>(1, channels / 2);
      h.theta = Tensor({channels, inner});
      h.phi = Tensor({channels, inner});
      fill(h.theta, 1.0 / std::sqrt(static_cast<double>(channels)));
      fill(h.phi, 1.0 / std::sqrt(static_cast<double>(channels)));
      break;
    }
    case HeadActivation::kUnweighted:
      break;
  }
  return h;
}

void WeightingHead::collect(ParamList& out) {
  switch (activation) {
    case HeadActivation::kSigmoid:
    case HeadActivation::kIdentity:
      out.add("weight", weight);
      out.add("bias", bias);
      break;
    case HeadActivation::kEmbeddedGaussian:
      out.add("theta", theta);
      out.add("phi", phi);
      break;
    case HeadActivation::kUnweighted:
      break;
  }
}

Var pair_weights(ParamBinder& params, const WeightingHead& head,
                 const Var& x_row, const Var& x_col,
                 const std::shared_ptr<const NeighborTable>& support) {
  Tape& tape = params.tape();
  const Shape& xs = x_row.shape();
  if (xs.size() != 3 || x_col.shape() != xs) {
    throw DimensionError("pair_weights: expected equal [F x N x C] inputs, got " +
                         shape_string(xs) + " and " +
                         shape_string(x_col.shape()));
  }
  if (support->frames != xs[0] || support->joints != xs[1]) {
    throw DimensionError("pair_weights: support is " +
                         std::to_string(support->frames) + " frames x " +
                         std::to_string(support->joints) + " joints but features are " +
                         shape_string(xs));
  }
  const std::size_t c = xs[2];
  if (head.activation != HeadActivation::kUnweighted && head.channels != c) {
    throw DimensionError("pair_weights: head built for " +
                         std::to_string(head.channels) + " channels, features have " +
                         std::to_string(c));
  }
  switch (head.activation) {
    case HeadActivation::kSigmoid:
    case HeadActivation::kIdentity: {
      const Var w = params(head.weight);
      std::vector<std::size_t> first(c), second(c);
      std::iota(first.begin(), first.end(), 0);
      std::iota(second.begin(), second.end(), c);
      const Var s = matmul(x_row, index_select(w, std::move(first)));
      const Var r = matmul(x_col, index_select(w, std::move(second)));
      const Var score = add(pair_sum(s, r, support), params(head.bias));
      return head.activation == HeadActivation::kSigmoid ? sigmoid(score) : score;
    }
    case HeadActivation::kEmbeddedGaussian: {
      const Var q = matmul(x_row, params(head.theta));
      const Var p = matmul(x_col, params(head.phi));
      return pair_softmax(pair_dot(q, p, support), support);
    }
    case HeadActivation::kUnweighted: {
      Tensor ones({support->frames, support->joints, support->width});
      for (std::size_t i = 0; i < ones.size(); ++i) {
        ones[i] = support->index[i] == NeighborTable::kEmpty ? 0.0 : 1.0;
      }
      return tape.constant(std::move(ones));
    }
  }
  throw ConfigError("pair_weights: unknown activation");
}

Var assemble_affinity(const Var& weights,
                      const std::shared_ptr<const NeighborTable>& support) {
  return scatter_pairs(weights, support);
}

// ---- Builders ---------------------------------------------------------------

AffinityMatrix build_fixed_spatial(const SkeletonGraph& skeleton,
                                   bool self_loops, bool row_normalize) {
  skeleton.validate();
  const std::size_t n = skeleton.joint_count;
  Tensor a({n, n});
  for (const auto& [i, j] : skeleton.edges) {
    a.at(i, j) = 1.0;
    a.at(j, i) = 1.0;
  }
  if (self_loops) {
    for (std::size_t i = 0; i < n; ++i) a.at(i, i) = 1.0;
  }
  if (row_normalize) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a.at(i, j);
      if (s > 0.0) {
        for (std::size_t j = 0; j < n; ++j) a.at(i, j) /= s;
      }
    }
  }
  return {std::move(a), AffinityKind::kFixedSpatial};
}

AffinityMatrix build_fixed_temporal(std::size_t joints,
                                    TemporalDirection direction) {
  return {Tensor::identity(joints), direction == TemporalDirection::kForward
                                        ? AffinityKind::kFixedTemporalForward
                                        : AffinityKind::kFixedTemporalBackward};
}

AffinityMatrix build_dynamical_spatial(const Tensor& features, std::size_t k,
                                       const WeightingHead& head,
                                       bool include_self) {
  if (features.rank() != 2) {
    throw DimensionError("build_dynamical_spatial: features must be [N x C]");
  }
  auto support = std::make_shared<const NeighborTable>(
      knn_spatial_table(features, k, include_self));
  return weigh_support(features, features, support, head,
                       AffinityKind::kDynamicalSpatial);
}

AffinityMatrix build_dynamical_temporal(const Tensor& features_t,
                                        const Tensor& features_adj,
                                        std::size_t k,
                                        const WeightingHead& head,
                                        TemporalDirection direction,
                                        bool include_self) {
  if (features_t.rank() != 2) {
    throw DimensionError("build_dynamical_temporal: features must be [N x C]");
  }
  auto support = std::make_shared<const NeighborTable>(
      knn_temporal_table(features_t, features_adj, k, include_self));
  return weigh_support(features_t, features_adj, support, head,
                       direction == TemporalDirection::kForward
                           ? AffinityKind::kDynamicalTemporalForward
                           : AffinityKind::kDynamicalTemporalBackward);
}

// ---- Connection styles ------------------------------------------------------

const char* to_string(ConnectionStyle s) {
  switch (s) {
    case ConnectionStyle::kDynamical: return "dynamical";
    case ConnectionStyle::kFixed: return "fixed";
    case ConnectionStyle::kFull: return "full";
    case ConnectionStyle::kRandom: return "random";
    case ConnectionStyle::kSymmetry: return "symmetry";
    case ConnectionStyle::kPrecomputed: return "precomputed";
  }
  return "?";
}

ConnectionStyle parse_connection_style(const std::string& s) {
  if (s == "dynamical") return ConnectionStyle::kDynamical;
  if (s == "fixed") return ConnectionStyle::kFixed;
  if (s == "full") return ConnectionStyle::kFull;
  if (s == "random") return ConnectionStyle::kRandom;
  if (s == "symmetry") return ConnectionStyle::kSymmetry;
  if (s == "precomputed") return ConnectionStyle::kPrecomputed;
  throw ConfigError("unknown connection style '" + s +
                    "' (expected dynamical, fixed, full, random, symmetry, "
                    "precomputed)");
}

namespace {

NeighborTable from_lists(const std::vector<std::vector<int>>& lists) {
  std::size_t width = 1;
  for (const auto& l : lists) width = std::max(width, l.size());
  NeighborTable t(1, lists.size(), width);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (std::size_t m = 0; m < lists[i].size(); ++m) {
      t.row(0, i)[m] = lists[i][m];
    }
  }
  return t;
}

}  // namespace

NeighborTable skeleton_support(const SkeletonGraph& skeleton) {
  skeleton.validate();
  return from_lists(skeleton.adjacency());
}

NeighborTable symmetry_spatial_support(const SkeletonGraph& skeleton) {
  skeleton.validate();
  if (skeleton.mirror_pairs.empty()) {
    throw ConfigError("symmetry connection style needs mirror pairs in the "
                      "skeleton");
  }
  std::vector<std::set<int>> sets(skeleton.joint_count);
  for (const auto& [a, b] : skeleton.edges) {
    sets[a].insert(b);
    sets[b].insert(a);
  }
  for (const auto& [a, b] : skeleton.mirror_pairs) {
    sets[a].insert(b);
    sets[b].insert(a);
  }
  std::vector<std::vector<int>> lists;
  for (const auto& s : sets) lists.emplace_back(s.begin(), s.end());
  return from_lists(lists);
}

NeighborTable symmetry_temporal_support(const SkeletonGraph& skeleton) {
  skeleton.validate();
  if (skeleton.mirror_pairs.empty()) {
    throw ConfigError("symmetry connection style needs mirror pairs in the "
                      "skeleton");
  }
  const std::vector<int> mirror = skeleton.mirror_map();
  std::vector<std::vector<int>> lists(skeleton.joint_count);
  for (std::size_t i = 0; i < skeleton.joint_count; ++i) {
    lists[i].push_back(static_cast<int>(i));
    if (mirror[i] != static_cast<int>(i)) lists[i].push_back(mirror[i]);
  }
  return from_lists(lists);
}

NeighborTable full_support(std::size_t joints, bool include_self) {
  std::vector<std::vector<int>> lists(joints);
  for (std::size_t i = 0; i < joints; ++i) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (j != i || include_self) lists[i].push_back(static_cast<int>(j));
    }
  }
  return from_lists(lists);
}

NeighborTable identity_support(std::size_t joints) {
  NeighborTable t(1, joints, 1);
  for (std::size_t i = 0; i < joints; ++i) t.row(0, i)[0] = static_cast<int>(i);
  return t;
}

NeighborTable random_support(std::size_t joints, std::size_t k,
                             bool include_self, Rng& rng) {
  check_k(k, joints, include_self, "random support");
  std::vector<std::vector<int>> lists(joints);
  for (std::size_t i = 0; i < joints; ++i) {
    std::vector<int> pool;
    for (std::size_t j = 0; j < joints; ++j) {
      if (j != i || include_self) pool.push_back(static_cast<int>(j));
    }
    rng.shuffle(pool);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    lists[i] = std::move(pool);
  }
  return from_lists(lists);
}

NeighborTable repeat_frames(const NeighborTable& single, std::size_t frames) {
  if (single.frames != 1) {
    throw DimensionError("repeat_frames expects a single-frame table");
  }
  NeighborTable t(frames, single.joints, single.width);
  for (std::size_t f = 0; f < frames; ++f) {
    std::copy(single.index.begin(), single.index.end(),
              t.index.begin() + f * single.index.size());
  }
  return t;
}

AffinityMatrix build_ablation_affinity(ConnectionStyle style,
                                       const AblationContext& ctx) {
  if (!ctx.head) throw ConfigError("ablation affinity needs a weighting head");
  if (ctx.features.rank() != 2) {
    throw DimensionError("ablation affinity: features must be [N x C]");
  }
  const std::size_t n = ctx.features.dim(0);
  NeighborTable support;
  AffinityKind kind;
  switch (style) {
    case ConnectionStyle::kDynamical:
      support = knn_spatial_table(ctx.features, ctx.k);
      kind = AffinityKind::kDynamicalSpatial;
      break;
    case ConnectionStyle::kFixed:
      if (!ctx.skeleton) throw ConfigError("fixed style needs a skeleton");
      support = skeleton_support(*ctx.skeleton);
      kind = AffinityKind::kFixedSpatial;
      break;
    case ConnectionStyle::kFull:
      support = full_support(n, false);
      kind = AffinityKind::kFull;
      break;
    case ConnectionStyle::kRandom: {
      Rng rng(ctx.seed);
      support = random_support(n, ctx.k, false, rng);
      kind = AffinityKind::kRandom;
      break;
    }
    case ConnectionStyle::kSymmetry:
      if (!ctx.skeleton) throw ConfigError("symmetry style needs a skeleton");
      support = symmetry_spatial_support(*ctx.skeleton);
      kind = AffinityKind::kSymmetry;
      break;
    case ConnectionStyle::kPrecomputed:
      if (ctx.pose2d.rank() != 2 || ctx.pose2d.dim(0) != n) {
        throw ConfigError("precomputed style needs an [N x 2] input pose");
      }
      support = knn_spatial_table(ctx.pose2d, ctx.k);
      kind = AffinityKind::kPrecomputed;
      break;
    default:
      throw ConfigError("unknown connection style");
  }
  if (support.joints != n) {
    throw DimensionError("ablation affinity: skeleton has " +
                         std::to_string(support.joints) + " joints, features " +
                         std::to_string(n));
  }
  auto shared = std::make_shared<const NeighborTable>(std::move(support));
  return weigh_support(ctx.features, ctx.features, shared, *ctx.head, kind);
}

}  // namespace dgnet
