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

#include "dgnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>

#include "dgnet/error.hpp"
#include "dgnet/graph_conv.hpp"
#include "dgnet/model.hpp"
#include "dgnet/rng.hpp"

namespace dgnet {
namespace {

constexpr std::size_t kBatch = 2;
constexpr std::size_t kFrames = 3;
constexpr std::size_t kIn = 6;
constexpr std::size_t kOut = 5;
constexpr double kModelJitter = 0.05;

// One differentiable instance: `run` maps the input leaf to the list of
// outputs that enter the loss.
struct Instance {
  Tensor input;
  ParamList params;
  FrameLayout layout;
  std::function<std::vector<Var>(ForwardContext&, const Var&)> run;
  std::vector<std::shared_ptr<void>> keep;  // owns layers / models
};

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

Instance make_layer_instance(GradcheckTarget target, const GradcheckOptions& o,
                             const SkeletonGraph& sk, Rng& rng) {
  Instance inst;
  inst.layout = FrameLayout::make(kBatch, kFrames);
  const std::size_t n = sk.joint_count;
  const std::size_t cin = kIn;
  inst.input = Tensor({kBatch * kFrames, n, cin});
  fill_uniform(inst.input, rng, -2.0, 2.0);

  auto keep_layer = [&](std::shared_ptr<GraphLayer> layer) {
    layer->collect(inst.params);
    inst.keep.push_back(layer);
    inst.run = [layer](ForwardContext& ctx, const Var& x) {
      return std::vector<Var>{layer->preact(ctx, x)};
    };
  };
  const SupportOptions spatial{ConnectionStyle::kDynamical, o.weighting, 3, false};
  const SupportOptions temporal{ConnectionStyle::kDynamical, o.weighting, 4, true};
  switch (target) {
    case GradcheckTarget::kFsg: {
      auto a = std::make_shared<const Tensor>(build_fixed_spatial(sk).values);
      keep_layer(std::make_shared<FsgLayer>(a, cin, kOut, &rng));
      break;
    }
    case GradcheckTarget::kDsg:
      keep_layer(std::make_shared<DsgLayer>(spatial, &sk, cin, kOut, &rng));
      break;
    case GradcheckTarget::kFtg:
      keep_layer(std::make_shared<FtgLayer>(cin, kOut, &rng));
      break;
    case GradcheckTarget::kDtg:
      keep_layer(std::make_shared<DtgLayer>(temporal, &sk, cin, kOut, &rng));
      break;
    case GradcheckTarget::kNonlocal: {
      auto layer = std::make_shared<NonLocalLayer>(cin, &rng);
      layer->collect(inst.params);
      inst.keep.push_back(layer);
      inst.run = [layer](ForwardContext& ctx, const Var& x) {
        return std::vector<Var>{layer->forward(ctx, x)};
      };
      break;
    }
    case GradcheckTarget::kFullModel:
      break;
  }
  return inst;
}

Instance make_model_instance(const GradcheckOptions& o, const SkeletonGraph& sk,
                             Rng& rng) {
  VariantSpec spec;
  spec.channels = o.model_channels;
  spec.output_scale = 1.0;
  spec.weighting = o.weighting;
  spec.seed = rng.next_u64();
  auto model = std::shared_ptr<DgNetModel>(configure_variant(spec, sk).release());
  Instance inst;
  inst.layout = FrameLayout::make(1, spec.frames);
  inst.input = Tensor({1, spec.frames, sk.joint_count, 2});
  fill_uniform(inst.input, rng, -2.0, 2.0);
  inst.params = model->parameters();
  // Residual branches start at zero; move every parameter off its initial
  // value so that no gradient is identically zero by construction.
  for (const NamedParam& p : inst.params) {
    for (double& v : p.tensor->data()) v += rng.uniform(-kModelJitter, kModelJitter);
  }
  inst.keep.push_back(model);
  inst.run = [model](ForwardContext& ctx, const Var& x) {
    ForwardOptions fo;
    fo.cache = ctx.cache;
    const ModelOutput out = model->forward(ctx.tape, ctx.params, x.value(), fo);
    std::vector<Var> v{out.network_pred};
    v.insert(v.end(), out.block_preds.begin(), out.block_preds.end());
    return v;
  };
  return inst;
}

struct Pass {
  long double loss = 0.0L;
  std::uint64_t kinks = 0;
};

}  // namespace

const char* to_string(GradcheckTarget t) {
  switch (t) {
    case GradcheckTarget::kFsg: return "fsg";
    case GradcheckTarget::kDsg: return "dsg";
    case GradcheckTarget::kFtg: return "ftg";
    case GradcheckTarget::kDtg: return "dtg";
    case GradcheckTarget::kNonlocal: return "nonlocal";
    case GradcheckTarget::kFullModel: return "full-model";
  }
  return "?";
}

GradcheckTarget parse_gradcheck_target(const std::string& s) {
  for (GradcheckTarget t : {GradcheckTarget::kFsg, GradcheckTarget::kDsg,
                            GradcheckTarget::kFtg, GradcheckTarget::kDtg,
                            GradcheckTarget::kNonlocal, GradcheckTarget::kFullModel}) {
    if (s == to_string(t)) return t;
  }
  throw ConfigError("unknown gradcheck layer '" + s +
                    "' (fsg|dsg|ftg|dtg|nonlocal|full-model)");
}

double relative_error(double analytic, double numeric, double floor) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / den;
}

GradcheckReport run_gradcheck(GradcheckTarget target, const GradcheckOptions& o) {
  if (o.trials == 0) throw ConfigError("gradcheck: trials must be > 0");
  if (!(o.tolerance >= 0.0)) throw ConfigError("gradcheck: tolerance must be >= 0");
  if (!(o.step > 0.0) || !(o.floor > 0.0)) {
    throw ConfigError("gradcheck: step and floor must be > 0");
  }
  if (o.samples == 0) throw ConfigError("gradcheck: samples must be > 0");
  const SkeletonGraph sk = SkeletonGraph::human36m17();
  std::map<std::string, GroupResult> merged;
  std::vector<std::string> order;

  for (std::size_t trial = 0; trial < o.trials; ++trial) {
    Rng rng(splitmix64(o.seed ^ splitmix64(trial + 1)));
    Instance inst = target == GradcheckTarget::kFullModel
                        ? make_model_instance(o, sk, rng)
                        : make_layer_instance(target, o, sk, rng);
    SupportCache cache;

    // Analytic pass.
    GradBuffer grads(inst.params);
    std::vector<double> input_grad(inst.input.size(), 0.0);
    std::vector<Tensor> weights;
    Pass reference;
    {
      Tape tape;
      tape.set_track_kinks(true);
      ParamBinder binder(tape, &grads);
      ForwardContext ctx(tape, binder, inst.layout);
      ctx.cache = &cache;
      cache.set_mode(SupportCache::Mode::kRecord);
      const Var x = tape.leaf(inst.input, input_grad);
      const std::vector<Var> outs = inst.run(ctx, x);
      Var total;
      for (const Var& out : outs) {
        Tensor r(out.shape());
        fill_uniform(r, rng, -1.0, 1.0);
        const Var term = sum(mul(out, tape.constant(r)));
        total = total.valid() ? add(total, term) : term;
        weights.push_back(std::move(r));
      }
      tape.backward(total);
      reference.kinks = tape.kink_signature();
    }

    auto probe = [&]() {
      Tape tape;
      tape.set_track_kinks(true);
      ParamBinder binder(tape);
      ForwardContext ctx(tape, binder, inst.layout);
      ctx.cache = &cache;
      cache.set_mode(SupportCache::Mode::kReplay);
      const std::vector<Var> outs = inst.run(ctx, tape.view(inst.input));
      Pass p;
      for (std::size_t k = 0; k < outs.size(); ++k) {
        const Tensor& v = outs[k].value();
        for (std::size_t i = 0; i < v.size(); ++i) {
          p.loss += static_cast<long double>(v[i]) * weights[k][i];
        }
      }
      p.kinks = tape.kink_signature();
      return p;
    };

    auto check_tensor = [&](const std::string& name, Tensor& t,
                            std::span<const double> analytic) {
      if (!merged.count(name)) {
        merged[name].name = name;
        order.push_back(name);
      }
      GroupResult& g = merged[name];
      std::vector<std::size_t> coords(t.size());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
      rng.shuffle(coords);
      std::size_t taken = 0;
      for (std::size_t c : coords) {
        if (taken == o.samples) break;
        const double saved = t[c];
        t[c] = saved + o.step;
        const Pass plus = probe();
        t[c] = saved - o.step;
        const Pass minus = probe();
        t[c] = saved;
        if (plus.kinks != reference.kinks || minus.kinks != reference.kinks) {
          ++g.kinks;
          continue;
        }
        const double numeric =
            static_cast<double>((plus.loss - minus.loss) / (2.0L * o.step));
        g.worst = std::max(g.worst, relative_error(analytic[c], numeric, o.floor));
        ++g.checked;
        ++taken;
      }
    };

    // The model takes its 2D input by value, so only layer instances expose
    // an input gradient.
    if (target != GradcheckTarget::kFullModel) {
      check_tensor("input", inst.input, input_grad);
    }
    for (std::size_t i = 0; i < inst.params.size(); ++i) {
      check_tensor(inst.params[i].name, *inst.params[i].tensor, grads[i]);
    }
  }

  GradcheckReport report;
  for (const std::string& name : order) {
    report.groups.push_back(merged[name]);
    report.worst = std::max(report.worst, merged[name].worst);
  }
  bool all_checked = true;
  for (const GroupResult& g : report.groups) all_checked &= g.checked > 0;
  report.passed = all_checked && report.worst < o.tolerance;
  return report;
}

}  // namespace dgnet
