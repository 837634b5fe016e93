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

#include "dgnet/graph_conv.hpp"

#include <cmath>

#include "dgnet/error.hpp"

namespace dgnet {

void init_uniform(Tensor& t, std::size_t fan_in, Rng* rng) {
  if (!rng) return;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng->uniform(-bound, bound);
}

FrameLayout FrameLayout::make(std::size_t batch, std::size_t frames) {
  if (batch == 0 || frames == 0) {
    throw ConfigError("frame layout needs batch > 0 and frames > 0");
  }
  FrameLayout l;
  l.batch = batch;
  l.frames = frames;
  l.prev.resize(batch * frames);
  l.next.resize(batch * frames);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t i = b * frames + t;
      l.prev[i] = b * frames + (t == 0 ? 0 : t - 1);
      l.next[i] = b * frames + (t + 1 == frames ? t : t + 1);
    }
  }
  return l;
}

std::shared_ptr<const NeighborTable> SupportCache::get(
    const std::function<NeighborTable()>& compute) {
  if (mode_ == Mode::kReplay) {
    if (cursor_ >= tables_.size()) {
      throw ValidationError("support cache exhausted: the replayed pass "
                            "selects more supports than the recorded one");
    }
    return tables_[cursor_++];
  }
  auto t = std::make_shared<const NeighborTable>(compute());
  tables_.push_back(t);
  ++cursor_;
  return t;
}

const Tensor* AffinityRecorder::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::shared_ptr<const NeighborTable> ForwardContext::support(
    const std::function<NeighborTable()>& compute) {
  if (cache) return cache->get(compute);
  return std::make_shared<const NeighborTable>(compute());
}

void ForwardContext::record(const std::string& name, const Var& dense) {
  if (!recorder) return;
  const std::string& scope = tape.scope_name();
  recorder->entries.emplace_back(scope.empty() ? name : scope + "/" + name,
                                 dense.value());
}

Var GraphLayer::forward(ForwardContext& ctx, const Var& x, bool activate) const {
  const Var y = preact(ctx, x);
  return activate ? relu(y) : y;
}

namespace {

void check_input(const Var& x, std::size_t channels, const char* layer) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[2] != channels) {
    throw DimensionError(std::string(layer) + ": expected [F x N x " +
                         std::to_string(channels) + "] input, got " +
                         shape_string(s));
  }
}

Var affine(ParamBinder& p, const Var& x, const Tensor& w, const Tensor& b) {
  return linear({x}, {p(w)}, p(b));
}

}  // namespace

// ---- FSG --------------------------------------------------------------------

FsgLayer::FsgLayer(std::shared_ptr<const Tensor> a, std::size_t cin,
                   std::size_t cout, Rng* rng)
    : affinity(std::move(a)), theta({cin, cout}), bias({cout}) {
  if (!affinity || affinity->rank() != 2 ||
      affinity->dim(0) != affinity->dim(1)) {
    throw DimensionError("fsg: affinity must be a square matrix");
  }
  init_uniform(theta, cin, rng);
}

Var FsgLayer::preact(ForwardContext& ctx, const Var& x) const {
  check_input(x, in_channels(), "fsg");
  if (x.shape()[1] != affinity->dim(0)) {
    throw DimensionError("fsg: affinity is " + shape_string(affinity->shape()) +
                         " but input has " + std::to_string(x.shape()[1]) +
                         " joints");
  }
  const Var ax = bmm(ctx.tape.view(*affinity), x);
  return affine(ctx.params, ax, theta, bias);
}

void FsgLayer::collect(ParamList& out) {
  out.add("theta", theta);
  out.add("bias", bias);
}

void FsgLayer::zero_weights() { std::fill(theta.data().begin(), theta.data().end(), 0.0); }

// ---- DSG --------------------------------------------------------------------

namespace {

std::shared_ptr<const NeighborTable> make_static_spatial(
    const SupportOptions& o, const SkeletonGraph* skeleton, Rng* rng) {
  auto need_skeleton = [&]() -> const SkeletonGraph& {
    if (!skeleton) {
      throw ConfigError(std::string(to_string(o.style)) +
                        " connection style needs a skeleton");
    }
    return *skeleton;
  };
  switch (o.style) {
    case ConnectionStyle::kDynamical:
    case ConnectionStyle::kPrecomputed:
      return nullptr;
    case ConnectionStyle::kFixed:
      return std::make_shared<const NeighborTable>(
          skeleton_support(need_skeleton()));
    case ConnectionStyle::kFull:
      return std::make_shared<const NeighborTable>(
          full_support(need_skeleton().joint_count, false));
    case ConnectionStyle::kSymmetry:
      return std::make_shared<const NeighborTable>(
          symmetry_spatial_support(need_skeleton()));
    case ConnectionStyle::kRandom: {
      Rng local(rng ? rng->next_u64() : 0);
      return std::make_shared<const NeighborTable>(
          random_support(need_skeleton().joint_count, o.k, o.include_self, local));
    }
  }
  return nullptr;
}

std::shared_ptr<const NeighborTable> make_static_temporal(
    const SupportOptions& o, const SkeletonGraph* skeleton, Rng* rng) {
  auto need_skeleton = [&]() -> const SkeletonGraph& {
    if (!skeleton) {
      throw ConfigError(std::string(to_string(o.style)) +
                        " connection style needs a skeleton");
    }
    return *skeleton;
  };
  switch (o.style) {
    case ConnectionStyle::kDynamical:
    case ConnectionStyle::kPrecomputed:
      return nullptr;
    case ConnectionStyle::kFixed:
      return std::make_shared<const NeighborTable>(
          identity_support(need_skeleton().joint_count));
    case ConnectionStyle::kFull:
      return std::make_shared<const NeighborTable>(
          full_support(need_skeleton().joint_count, true));
    case ConnectionStyle::kSymmetry:
      return std::make_shared<const NeighborTable>(
          symmetry_temporal_support(need_skeleton()));
    case ConnectionStyle::kRandom: {
      Rng local(rng ? rng->next_u64() : 0);
      return std::make_shared<const NeighborTable>(
          random_support(need_skeleton().joint_count, o.k, true, local));
    }
  }
  return nullptr;
}

std::shared_ptr<const NeighborTable> frames_of(
    const std::shared_ptr<const NeighborTable>& t, std::size_t frames,
    std::size_t joints, const char* what) {
  if (t->joints != joints) {
    throw DimensionError(std::string(what) + ": support has " +
                         std::to_string(t->joints) + " joints, input " +
                         std::to_string(joints));
  }
  if (t->frames == frames) return t;
  return std::make_shared<const NeighborTable>(repeat_frames(*t, frames));
}

}  // namespace

DsgLayer::DsgLayer(const SupportOptions& o, const SkeletonGraph* skeleton,
                   std::size_t cin, std::size_t cout, Rng* rng)
    : options(o),
      phi({cin, cout}),
      bias({cout}),
      gamma(WeightingHead::make(o.weighting, cin, rng)) {
  init_uniform(phi, cin, rng);
  static_support = make_static_spatial(o, skeleton, rng);
}

std::shared_ptr<const NeighborTable> DsgLayer::support_for(
    ForwardContext& ctx, const Tensor& x) const {
  const std::size_t f = x.dim(0), n = x.dim(1);
  switch (options.style) {
    case ConnectionStyle::kDynamical:
      return ctx.support([&] {
        return knn_spatial_table(x, options.k, options.include_self);
      });
    case ConnectionStyle::kPrecomputed:
      if (!ctx.precomputed_spatial) {
        throw ConfigError("precomputed style: no input-pose support available");
      }
      return frames_of(ctx.precomputed_spatial, f, n, "dsg");
    default:
      return frames_of(static_support, f, n, "dsg");
  }
}

Var DsgLayer::preact(ForwardContext& ctx, const Var& x) const {
  check_input(x, in_channels(), "dsg");
  const auto support = support_for(ctx, x.value());
  const Var w = pair_weights(ctx.params, gamma, x, x, support);
  if (ctx.recorder) ctx.record("B", assemble_affinity(w, support));
  return affine(ctx.params, pair_aggregate(w, x, support), phi, bias);
}

void DsgLayer::collect(ParamList& out) {
  out.add("phi", phi);
  out.add("bias", bias);
  ParamList head;
  gamma.collect(head);
  out.extend("gamma", head);
}

void DsgLayer::zero_weights() { std::fill(phi.data().begin(), phi.data().end(), 0.0); }

// ---- FTG --------------------------------------------------------------------

FtgLayer::FtgLayer(std::size_t cin, std::size_t cout, Rng* rng)
    : w_x({cin, cout}), w_f({cin, cout}), w_b({cin, cout}), bias({cout}) {
  init_uniform(w_x, cin, rng);
  init_uniform(w_f, cin, rng);
  init_uniform(w_b, cin, rng);
}

Var FtgLayer::preact(ForwardContext& ctx, const Var& x) const {
  check_input(x, in_channels(), "ftg");
  if (x.shape()[0] != ctx.layout.total()) {
    throw DimensionError("ftg: input has " + std::to_string(x.shape()[0]) +
                         " frames, layout expects " +
                         std::to_string(ctx.layout.total()));
  }
  return preact_triplet(ctx, index_select(x, ctx.layout.prev), x,
                        index_select(x, ctx.layout.next));
}

Var FtgLayer::preact_triplet(ForwardContext& ctx, const Var& x_prev,
                             const Var& x_t, const Var& x_next) const {
  check_input(x_t, in_channels(), "ftg");
  if (x_prev.shape() != x_t.shape() || x_next.shape() != x_t.shape()) {
    throw DimensionError("ftg: frame triple shapes differ");
  }
  ParamBinder& p = ctx.params;
  return linear({x_t, x_next, x_prev}, {p(w_x), p(w_f), p(w_b)}, p(bias));
}

void FtgLayer::collect(ParamList& out) {
  out.add("w_x", w_x);
  out.add("w_f", w_f);
  out.add("w_b", w_b);
  out.add("bias", bias);
}

void FtgLayer::zero_weights() {
  for (Tensor* t : {&w_x, &w_f, &w_b}) std::fill(t->data().begin(), t->data().end(), 0.0);
}

// ---- DTG --------------------------------------------------------------------

DtgLayer::DtgLayer(const SupportOptions& o, const SkeletonGraph* skeleton,
                   std::size_t cin, std::size_t cout, Rng* rng)
    : options(o),
      u_x({cin, cout}),
      u_f({cin, cout}),
      u_b({cin, cout}),
      bias({cout}) {
  init_uniform(u_x, cin, rng);
  init_uniform(u_f, cin, rng);
  init_uniform(u_b, cin, rng);
  alpha = WeightingHead::make(o.weighting, cin, rng);
  beta = WeightingHead::make(o.weighting, cin, rng);
  static_support = make_static_temporal(o, skeleton, rng);
}

std::shared_ptr<const NeighborTable> DtgLayer::support_for(
    ForwardContext& ctx, const Tensor& x_t, const Tensor& x_adj,
    TemporalDirection dir) const {
  const std::size_t f = x_t.dim(0), n = x_t.dim(1);
  switch (options.style) {
    case ConnectionStyle::kDynamical:
      return ctx.support([&] {
        return knn_temporal_table(x_t, x_adj, options.k, options.include_self);
      });
    case ConnectionStyle::kPrecomputed: {
      const auto& t = dir == TemporalDirection::kForward ? ctx.precomputed_next
                                                          : ctx.precomputed_prev;
      if (!t) {
        throw ConfigError("precomputed style: no input-pose support available");
      }
      return frames_of(t, f, n, "dtg");
    }
    default:
      return frames_of(static_support, f, n, "dtg");
  }
}

Var DtgLayer::preact(ForwardContext& ctx, const Var& x) const {
  check_input(x, in_channels(), "dtg");
  if (x.shape()[0] != ctx.layout.total()) {
    throw DimensionError("dtg: input has " + std::to_string(x.shape()[0]) +
                         " frames, layout expects " +
                         std::to_string(ctx.layout.total()));
  }
  return preact_triplet(ctx, index_select(x, ctx.layout.prev), x,
                        index_select(x, ctx.layout.next));
}

Var DtgLayer::preact_triplet(ForwardContext& ctx, const Var& x_prev,
                             const Var& x_t, const Var& x_next) const {
  check_input(x_t, in_channels(), "dtg");
  if (x_prev.shape() != x_t.shape() || x_next.shape() != x_t.shape()) {
    throw DimensionError("dtg: frame triple shapes differ");
  }
  ParamBinder& p = ctx.params;
  const auto s_next = support_for(ctx, x_t.value(), x_next.value(),
                                  TemporalDirection::kForward);
  const Var w_next = pair_weights(p, alpha, x_t, x_next, s_next);
  if (ctx.recorder) ctx.record("Q_next", assemble_affinity(w_next, s_next));
  const auto s_prev = support_for(ctx, x_t.value(), x_prev.value(),
                                  TemporalDirection::kBackward);
  const Var w_prev = pair_weights(p, beta, x_t, x_prev, s_prev);
  if (ctx.recorder) ctx.record("Q_prev", assemble_affinity(w_prev, s_prev));

  return linear({x_t, pair_aggregate(w_next, x_next, s_next),
                 pair_aggregate(w_prev, x_prev, s_prev)},
                {p(u_x), p(u_f), p(u_b)}, p(bias));
}

void DtgLayer::collect(ParamList& out) {
  out.add("u_x", u_x);
  out.add("u_f", u_f);
  out.add("u_b", u_b);
  out.add("bias", bias);
  ParamList a, b;
  alpha.collect(a);
  beta.collect(b);
  out.extend("alpha", a);
  out.extend("beta", b);
}

void DtgLayer::zero_weights() {
  for (Tensor* t : {&u_x, &u_f, &u_b}) std::fill(t->data().begin(), t->data().end(), 0.0);
}

// ---- Unified spatio-temporal ----------------------------------------------

SpatioTemporalLayer::SpatioTemporalLayer(std::unique_ptr<GraphLayer> spatial,
                                         std::unique_ptr<GraphLayer> temporal)
    : spatial_(std::move(spatial)), temporal_(std::move(temporal)) {
  if (spatial_->in_channels() != temporal_->in_channels() ||
      spatial_->out_channels() != temporal_->out_channels()) {
    throw DimensionError("spatio-temporal layer: branch widths differ");
  }
}

Var SpatioTemporalLayer::preact(ForwardContext& ctx, const Var& x) const {
  Var s, t;
  {
    Tape::Scope scope(ctx.tape, spatial_->kind());
    s = spatial_->preact(ctx, x);
  }
  {
    Tape::Scope scope(ctx.tape, temporal_->kind());
    t = temporal_->preact(ctx, x);
  }
  return add(s, t);
}

void SpatioTemporalLayer::collect(ParamList& out) {
  ParamList s, t;
  spatial_->collect(s);
  temporal_->collect(t);
  out.extend(spatial_->kind(), s);
  out.extend(temporal_->kind(), t);
}

void SpatioTemporalLayer::zero_weights() {
  spatial_->zero_weights();
  temporal_->zero_weights();
}

// ---- Non-local --------------------------------------------------------------

NonLocalLayer::NonLocalLayer(std::size_t c, Rng* rng) {
  if (c == 0) throw ConfigError("non-local block needs channels > 0");
  const std::size_t inner = std::max<std::size_t>(1, c / 2);
  w_q = Tensor({c, inner});
  w_k = Tensor({c, inner});
  w_v = Tensor({c, inner});
  w_out = Tensor({inner, c});
  b_q = Tensor({inner});
  b_k = Tensor({inner});
  b_v = Tensor({inner});
  b_out = Tensor({c});
  init_uniform(w_q, c, rng);
  init_uniform(w_k, c, rng);
  init_uniform(w_v, c, rng);
  init_uniform(w_out, inner, rng);
}

Var NonLocalLayer::forward(ForwardContext& ctx, const Var& x) const {
  check_input(x, channels(), "nonlocal");
  ParamBinder& p = ctx.params;
  const Var q = affine(p, x, w_q, b_q);
  const Var k = affine(p, x, w_k, b_k);
  const Var v = affine(p, x, w_v, b_v);
  const double s = 1.0 / std::sqrt(static_cast<double>(inner()));
  const Var attention = softmax_lastdim(scale(bmm(q, k, true), s));
  ctx.record("attention", attention);
  return add(x, affine(p, bmm(attention, v), w_out, b_out));
}

void NonLocalLayer::collect(ParamList& out) {
  out.add("w_q", w_q);
  out.add("b_q", b_q);
  out.add("w_k", w_k);
  out.add("b_k", b_k);
  out.add("w_v", w_v);
  out.add("b_v", b_v);
  out.add("w_out", w_out);
  out.add("b_out", b_out);
}

// ---- Residual module --------------------------------------------------------

ResidualModule::ResidualModule(std::unique_ptr<GraphLayer> conv1,
                               std::unique_ptr<GraphLayer> conv2, Rng* rng)
    : conv1_(std::move(conv1)), conv2_(std::move(conv2)) {
  if (conv1_->out_channels() != conv2_->in_channels()) {
    throw DimensionError("residual module: conv1 output width differs from "
                         "conv2 input width");
  }
  const std::size_t cin = conv1_->in_channels(), cout = conv2_->out_channels();
  if (cin != cout) {
    skip_ = Tensor({cin, cout});
    init_uniform(skip_, cin, rng);
  }
}

Var ResidualModule::forward(ForwardContext& ctx, const Var& x) const {
  Var h;
  {
    Tape::Scope scope(ctx.tape, "conv1");
    h = relu(conv1_->preact(ctx, x));
  }
  Var y;
  {
    Tape::Scope scope(ctx.tape, "conv2");
    y = conv2_->preact(ctx, h);
  }
  const Var skip = skip_.empty() ? x : matmul(x, ctx.params(skip_));
  return add(skip, y);
}

void ResidualModule::collect(ParamList& out) {
  ParamList a, b;
  conv1_->collect(a);
  conv2_->collect(b);
  out.extend("conv1", a);
  out.extend("conv2", b);
  if (!skip_.empty()) out.add("skip", skip_);
}

// ---- Factory ----------------------------------------------------------------

const char* to_string(LayerType t) {
  switch (t) {
    case LayerType::kFsg: return "FSG";
    case LayerType::kDsg: return "DSG";
    case LayerType::kFtg: return "FTG";
    case LayerType::kDtg: return "DTG";
  }
  return "?";
}

LayerType parse_layer_type(const std::string& s) {
  if (s == "FSG" || s == "fsg") return LayerType::kFsg;
  if (s == "DSG" || s == "dsg") return LayerType::kDsg;
  if (s == "FTG" || s == "ftg") return LayerType::kFtg;
  if (s == "DTG" || s == "dtg") return LayerType::kDtg;
  throw ConfigError("unknown layer type '" + s +
                    "' (expected FSG, DSG, FTG, DTG)");
}

bool is_spatial(LayerType t) {
  return t == LayerType::kFsg || t == LayerType::kDsg;
}

std::unique_ptr<GraphLayer> make_layer(LayerType type, std::size_t cin,
                                       std::size_t cout,
                                       const LayerOptions& o, Rng* rng) {
  switch (type) {
    case LayerType::kFsg:
      if (!o.fixed_affinity) throw ConfigError("FSG layer needs an affinity");
      return std::make_unique<FsgLayer>(o.fixed_affinity, cin, cout, rng);
    case LayerType::kDsg:
      return std::make_unique<DsgLayer>(o.spatial, o.skeleton, cin, cout, rng);
    case LayerType::kFtg:
      return std::make_unique<FtgLayer>(cin, cout, rng);
    case LayerType::kDtg:
      return std::make_unique<DtgLayer>(o.temporal, o.skeleton, cin, cout, rng);
  }
  throw ConfigError("unknown layer type");
}

}  // namespace dgnet
