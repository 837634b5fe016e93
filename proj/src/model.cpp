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

#include "dgnet/model.hpp"

#include <algorithm>

#include "dgnet/error.hpp"

namespace dgnet {

const char* to_string(DgForm f) {
  return f == DgForm::kUnified ? "unified" : "factorized";
}

DgForm parse_dg_form(const std::string& s) {
  if (s == "factorized") return DgForm::kFactorized;
  if (s == "unified") return DgForm::kUnified;
  throw ConfigError("unknown dg form '" + s + "' (expected factorized, unified)");
}

std::string stack_string(const std::vector<LayerType>& stack) {
  std::string s;
  for (LayerType t : stack) {
    if (!s.empty()) s += '+';
    s += to_string(t);
  }
  return s;
}

std::vector<LayerType> parse_stack(const std::string& s) {
  std::vector<LayerType> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t plus = s.find('+', start);
    if (plus == std::string::npos) plus = s.size();
    const std::string tok = s.substr(start, plus - start);
    if (tok.empty()) throw ConfigError("empty layer name in stack '" + s + "'");
    out.push_back(parse_layer_type(tok));
    start = plus + 1;
  }
  return out;
}

void VariantSpec::validate(std::size_t joints) const {
  if (spatial_stack.empty()) throw ConfigError("spatial stack is empty");
  if (temporal_stack.empty()) throw ConfigError("temporal stack is empty");
  for (LayerType t : spatial_stack) {
    if (!is_spatial(t)) {
      throw ConfigError("spatial stack may only hold FSG and DSG, got " +
                        std::string(to_string(t)));
    }
  }
  for (LayerType t : temporal_stack) {
    if (is_spatial(t)) {
      throw ConfigError("temporal stack may only hold FTG and DTG, got " +
                        std::string(to_string(t)));
    }
  }
  if (blocks == 0) throw ConfigError("blocks must be > 0");
  if (frames < 2) throw ConfigError("frames (T) must be >= 2");
  if (channels == 0) throw ConfigError("channels must be > 0");
  if (!(output_scale > 0.0)) throw ConfigError("output_scale must be > 0");
  const std::size_t ks_max = spatial_include_self ? joints : joints - 1;
  const std::size_t kt_max = temporal_include_self ? joints : joints - 1;
  if (k_spatial == 0 || k_spatial > ks_max) {
    throw ConfigError("k_spatial=" + std::to_string(k_spatial) +
                      " must be in [1, " + std::to_string(ks_max) + "]");
  }
  if (k_temporal == 0 || k_temporal > kt_max) {
    throw ConfigError("k_temporal=" + std::to_string(k_temporal) +
                      " must be in [1, " + std::to_string(kt_max) + "]");
  }
}

DgNetModel::DgNetModel(const VariantSpec& spec, const SkeletonGraph& skeleton)
    : spec_(spec), skeleton_(skeleton) {
  skeleton_.validate();
  spec_.validate(skeleton_.joint_count);
  Rng rng(spec_.seed);
  build(rng);
  collect();
}

void DgNetModel::build(Rng& rng) {
  const std::size_t c = spec_.channels;
  fixed_affinity_ = std::make_shared<const Tensor>(
      build_fixed_spatial(skeleton_, spec_.self_loops, spec_.row_normalize)
          .values);
  LayerOptions lo;
  lo.skeleton = &skeleton_;
  lo.fixed_affinity = fixed_affinity_;
  lo.spatial = {spec_.connection_style, spec_.weighting, spec_.k_spatial,
                spec_.spatial_include_self};
  lo.temporal = {spec_.connection_style, spec_.weighting, spec_.k_temporal,
                 spec_.temporal_include_self};

  embed_ = std::make_unique<FsgLayer>(fixed_affinity_, 2, c, &rng);

  auto single = [&](LayerType t) { return make_layer(t, c, c, lo, &rng); };
  auto module_of = [&](auto make) {
    auto conv1 = make();
    auto conv2 = make();
    return ResidualModule(std::move(conv1), std::move(conv2), &rng);
  };
  auto lower = [](LayerType t) {
    std::string s = to_string(t);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    return s;
  };

  for (std::size_t b = 0; b < spec_.blocks; ++b) {
    Block block;
    if (spec_.form == DgForm::kFactorized) {
      for (const auto* stack : {&spec_.spatial_stack, &spec_.temporal_stack}) {
        Unit unit;
        unit.name = stack == &spec_.spatial_stack ? "spatial" : "temporal";
        for (std::size_t i = 0; i < stack->size(); ++i) {
          const LayerType t = (*stack)[i];
          unit.modules.push_back(module_of([&] { return single(t); }));
          unit.module_names.push_back(lower(t) + std::to_string(i));
        }
        if (spec_.nonlocal) unit.nonlocal.emplace(c, &rng);
        block.units.push_back(std::move(unit));
      }
    } else {
      // Spatial and temporal stacks zipped position by position; the longer
      // stack's tail stays single-branch.
      Unit unit;
      unit.name = "unified";
      const std::size_t depth =
          std::max(spec_.spatial_stack.size(), spec_.temporal_stack.size());
      for (std::size_t i = 0; i < depth; ++i) {
        const bool has_s = i < spec_.spatial_stack.size();
        const bool has_t = i < spec_.temporal_stack.size();
        std::string name;
        auto make = [&]() -> std::unique_ptr<GraphLayer> {
          if (has_s && has_t) {
            auto s = single(spec_.spatial_stack[i]);
            auto t = single(spec_.temporal_stack[i]);
            return std::make_unique<SpatioTemporalLayer>(std::move(s),
                                                         std::move(t));
          }
          return single(has_s ? spec_.spatial_stack[i] : spec_.temporal_stack[i]);
        };
        if (has_s) name += lower(spec_.spatial_stack[i]);
        if (has_t) name += (name.empty() ? "" : "_") + lower(spec_.temporal_stack[i]);
        unit.modules.push_back(module_of(make));
        unit.module_names.push_back(name + std::to_string(i));
      }
      if (spec_.nonlocal) unit.nonlocal.emplace(c, &rng);
      block.units.push_back(std::move(unit));
    }
    block.head = std::make_unique<FsgLayer>(fixed_affinity_, c, 3, &rng);
    blocks_.push_back(std::move(block));
  }
  if (spec_.zero_init_branches) {
    for (Block& block : blocks_) {
      for (Unit& unit : block.units) {
        for (ResidualModule& m : unit.modules) m.zero_branch();
        if (unit.nonlocal) unit.nonlocal->zero_output();
      }
    }
  }
  head_w_ = Tensor({spec_.blocks * c, 3});
  head_b_ = Tensor({3});
  init_uniform(head_w_, spec_.blocks * c, &rng);
}

void DgNetModel::collect() {
  ParamList p;
  embed_->collect(p);
  params_.extend("embed", p);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string bp = "block" + std::to_string(b + 1);
    for (Unit& unit : blocks_[b].units) {
      for (std::size_t m = 0; m < unit.modules.size(); ++m) {
        ParamList mp;
        unit.modules[m].collect(mp);
        params_.extend(bp + "." + unit.name + "." + unit.module_names[m], mp);
      }
      if (unit.nonlocal) {
        ParamList np;
        unit.nonlocal->collect(np);
        params_.extend(bp + "." + unit.name + ".nonlocal", np);
      }
    }
    ParamList hp;
    blocks_[b].head->collect(hp);
    params_.extend(bp + ".head", hp);
  }
  params_.add("head.weight", head_w_);
  params_.add("head.bias", head_b_);
}

std::size_t DgNetModel::parameter_count(bool train_phase) const {
  std::size_t n = 0;
  for (const NamedParam& p : params_) {
    const bool block_head =
        p.name.rfind("block", 0) == 0 &&
        p.name.find(".head.") != std::string::npos;
    if (train_phase || !block_head) n += p.tensor->size();
  }
  return n;
}

ModelOutput DgNetModel::forward(Tape& tape, ParamBinder& params,
                                const Tensor& pose2d,
                                const ForwardOptions& options) const {
  const std::size_t n = skeleton_.joint_count;
  if (pose2d.rank() != 4 || pose2d.dim(3) != 2) {
    throw DimensionError("model input must be [B x T x N x 2], got " +
                         shape_string(pose2d.shape()));
  }
  if (pose2d.dim(2) != n) {
    throw ValidationError("model input has " + std::to_string(pose2d.dim(2)) +
                          " joints, skeleton has " + std::to_string(n));
  }
  const std::size_t batch = pose2d.dim(0), frames = pose2d.dim(1);
  ForwardContext ctx(tape, params, FrameLayout::make(batch, frames));
  ctx.cache = options.cache;
  ctx.recorder = options.recorder;

  const Var input = tape.constant(pose2d.reshaped({batch * frames, n, 2}));
  if (spec_.connection_style == ConnectionStyle::kPrecomputed) {
    const Tensor& x = input.value();
    const Tensor next = index_select(input, ctx.layout.next).value();
    const Tensor prev = index_select(input, ctx.layout.prev).value();
    ctx.precomputed_spatial = std::make_shared<const NeighborTable>(
        knn_spatial_table(x, spec_.k_spatial, spec_.spatial_include_self));
    ctx.precomputed_next = std::make_shared<const NeighborTable>(
        knn_temporal_table(x, next, spec_.k_temporal, spec_.temporal_include_self));
    ctx.precomputed_prev = std::make_shared<const NeighborTable>(
        knn_temporal_table(x, prev, spec_.k_temporal, spec_.temporal_include_self));
  }

  ModelOutput out;
  Var x;
  {
    Tape::Scope scope(tape, "embed");
    x = embed_->forward(ctx, input, true);
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    Tape::Scope block_scope(tape, "block" + std::to_string(b + 1));
    const Block& block = blocks_[b];
    for (const Unit& unit : block.units) {
      Tape::Scope unit_scope(tape, unit.name);
      for (std::size_t m = 0; m < unit.modules.size(); ++m) {
        Tape::Scope module_scope(tape, unit.module_names[m]);
        x = unit.modules[m].forward(ctx, x);
      }
      if (unit.nonlocal) {
        Tape::Scope nl_scope(tape, "nonlocal");
        x = unit.nonlocal->forward(ctx, x);
      }
    }
    out.block_features.push_back(x);
    if (options.block_heads) {
      Tape::Scope head_scope(tape, "head");
      out.block_preds.push_back(
          scale(block.head->forward(ctx, x, false), spec_.output_scale));
    }
  }
  {
    Tape::Scope scope(tape, "head");
    const Var fused = concat_lastdim(out.block_features);
    out.network_pred = scale(linear({fused}, {params(head_w_)}, params(head_b_)),
                             spec_.output_scale);
  }
  return out;
}

std::unique_ptr<DgNetModel> configure_variant(const VariantSpec& spec,
                                              const SkeletonGraph& skeleton) {
  return std::make_unique<DgNetModel>(spec, skeleton);
}

// ---- Loss -------------------------------------------------------------------

LossReport LossVars::report() const {
  LossReport r;
  r.network_loss = network.value()[0];
  for (const Var& b : blocks) r.block_losses.push_back(b.value()[0]);
  r.total = total.value()[0];
  return r;
}

LossVars loss(const ModelOutput& out, const Var& target, double lambda,
              std::size_t batch) {
  auto sse = [&](const Var& pred) {
    if (pred.shape() != target.shape()) {
      throw DimensionError("loss: prediction " + shape_string(pred.shape()) +
                           " vs target " + shape_string(target.shape()));
    }
    return scale(sum(square(sub(pred, target))),
                 1.0 / static_cast<double>(batch));
  };
  LossVars v;
  v.network = sse(out.network_pred);
  v.total = v.network;
  if (!out.block_preds.empty()) {
    Var block_sum = sse(out.block_preds[0]);
    v.blocks.push_back(block_sum);
    for (std::size_t b = 1; b < out.block_preds.size(); ++b) {
      v.blocks.push_back(sse(out.block_preds[b]));
      block_sum = add(block_sum, v.blocks.back());
    }
    if (lambda != 0.0) v.total = add(v.network, scale(block_sum, lambda));
  }
  return v;
}

LossReport loss(const std::vector<Tensor>& block_preds,
                const Tensor& network_pred, const Tensor& target,
                double lambda) {
  auto sse = [&](const Tensor& pred) {
    if (pred.shape() != target.shape()) {
      throw DimensionError("loss: prediction " + shape_string(pred.shape()) +
                           " vs target " + shape_string(target.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      s += d * d;
    }
    return s;
  };
  LossReport r;
  r.network_loss = sse(network_pred);
  double block_sum = 0.0;
  for (const Tensor& b : block_preds) {
    r.block_losses.push_back(sse(b));
    block_sum += r.block_losses.back();
  }
  r.total = r.network_loss + lambda * block_sum;
  return r;
}

Tensor balance_coordinates(const Tensor& pred_cam, const Tensor& pred_uvd,
                           const Intrinsics& k) {
  k.validate();
  if (pred_cam.shape() != pred_uvd.shape() || pred_cam.rank() == 0 ||
      pred_cam.shape().back() != 3) {
    throw DimensionError("balance_coordinates: expected equal [.. x 3] shapes, "
                         "got " + shape_string(pred_cam.shape()) + " and " +
                         shape_string(pred_uvd.shape()));
  }
  Tensor out = pred_cam;
  for (std::size_t j = 0; j < out.size(); j += 3) {
    const double z = pred_cam[j + 2];
    const double xb = z * (pred_uvd[j] - k.cx) / k.f;
    const double yb = z * (pred_uvd[j + 1] - k.cy) / k.f;
    out[j] = (pred_cam[j] + xb) / 2.0;
    out[j + 1] = (pred_cam[j + 1] + yb) / 2.0;
  }
  return out;
}

}  // namespace dgnet
