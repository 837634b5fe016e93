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

// Graph convolution layers.
//
// Features travel as [F, N, C] tensors where F = batch * frames. Spatial
// layers act on each of the F slices independently; temporal layers pair a
// slice with its previous and next frame of the same sample through the
// FrameLayout (boundary frames replicate themselves).

#ifndef DGNET_GRAPH_CONV_HPP_
#define DGNET_GRAPH_CONV_HPP_

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/affinity.hpp"
#include "dgnet/autodiff.hpp"
#include "dgnet/params.hpp"
#include "dgnet/rng.hpp"
#include "dgnet/skeleton.hpp"

namespace dgnet {

struct FrameLayout {
  std::size_t batch = 1;
  std::size_t frames = 1;
  std::vector<std::size_t> prev;  // flattened index of frame t-1 (or t at 0)
  std::vector<std::size_t> next;  // flattened index of frame t+1 (or t at T-1)

  static FrameLayout make(std::size_t batch, std::size_t frames);
  std::size_t total() const { return batch * frames; }
};

// Records the supports chosen during one forward pass and replays them on
// later passes, so finite-difference probes see a single fixed support.
class SupportCache {
 public:
  enum class Mode { kRecord, kReplay };

  void set_mode(Mode m) {
    mode_ = m;
    cursor_ = 0;
  }
  Mode mode() const { return mode_; }
  std::size_t size() const { return tables_.size(); }
  void clear() {
    tables_.clear();
    cursor_ = 0;
  }

  std::shared_ptr<const NeighborTable> get(
      const std::function<NeighborTable()>& compute);

 private:
  Mode mode_ = Mode::kRecord;
  std::vector<std::shared_ptr<const NeighborTable>> tables_;
  std::size_t cursor_ = 0;
};

// Dense affinities captured during a forward pass, keyed by scope path.
struct AffinityRecorder {
  std::vector<std::pair<std::string, Tensor>> entries;
  const Tensor* find(const std::string& key) const;
};

struct ForwardContext {
  ForwardContext(Tape& t, ParamBinder& p, FrameLayout l)
      : tape(t), params(p), layout(std::move(l)) {}

  Tape& tape;
  ParamBinder& params;
  FrameLayout layout;

  // Supports fixed from the input 2D pose, for the precomputed style.
  std::shared_ptr<const NeighborTable> precomputed_spatial;
  std::shared_ptr<const NeighborTable> precomputed_next;
  std::shared_ptr<const NeighborTable> precomputed_prev;

  SupportCache* cache = nullptr;
  AffinityRecorder* recorder = nullptr;

  std::shared_ptr<const NeighborTable> support(
      const std::function<NeighborTable()>& compute);
  void record(const std::string& name, const Var& dense);
};

// Connection style, weighting and neighbor count of one dynamical layer.
struct SupportOptions {
  ConnectionStyle style = ConnectionStyle::kDynamical;
  HeadActivation weighting = HeadActivation::kSigmoid;
  std::size_t k = 3;
  bool include_self = false;
};

class GraphLayer {
 public:
  virtual ~GraphLayer() = default;

  // Output before the nonlinearity.
  virtual Var preact(ForwardContext& ctx, const Var& x) const = 0;
  virtual void collect(ParamList& out) = 0;
  virtual std::size_t in_channels() const = 0;
  virtual std::size_t out_channels() const = 0;
  virtual const char* kind() const = 0;
  // Zeroes the feature transforms (not biases or weighting heads), making
  // preact() a constant bias.
  virtual void zero_weights() = 0;

  // relu(preact) when `activate`, else preact.
  Var forward(ForwardContext& ctx, const Var& x, bool activate) const;
};

// Fixed spatial: A X Theta + b.
class FsgLayer : public GraphLayer {
 public:
  FsgLayer(std::shared_ptr<const Tensor> affinity, std::size_t cin,
           std::size_t cout, Rng* rng);

  Var preact(ForwardContext& ctx, const Var& x) const override;
  void collect(ParamList& out) override;
  std::size_t in_channels() const override { return theta.dim(0); }
  std::size_t out_channels() const override { return theta.dim(1); }
  const char* kind() const override { return "fsg"; }
  void zero_weights() override;

  std::shared_ptr<const Tensor> affinity;  // [N x N]
  Tensor theta;                            // [C_in x C_out]
  Tensor bias;                             // [C_out]
};

// Dynamical spatial: B X Phi + b, with B rebuilt from x on every pass.
class DsgLayer : public GraphLayer {
 public:
  DsgLayer(const SupportOptions& options, const SkeletonGraph* skeleton,
           std::size_t cin, std::size_t cout, Rng* rng);

  Var preact(ForwardContext& ctx, const Var& x) const override;
  void collect(ParamList& out) override;
  std::size_t in_channels() const override { return phi.dim(0); }
  std::size_t out_channels() const override { return phi.dim(1); }
  const char* kind() const override { return "dsg"; }
  void zero_weights() override;

  std::shared_ptr<const NeighborTable> support_for(ForwardContext& ctx,
                                                   const Tensor& x) const;

  SupportOptions options;
  Tensor phi;
  Tensor bias;
  WeightingHead gamma;
  std::shared_ptr<const NeighborTable> static_support;  // non-dynamical styles
};

// Fixed temporal: X_t W_x + X_{t+1} W_f + X_{t-1} W_b + b.
class FtgLayer : public GraphLayer {
 public:
  FtgLayer(std::size_t cin, std::size_t cout, Rng* rng);

  Var preact(ForwardContext& ctx, const Var& x) const override;
  Var preact_triplet(ForwardContext& ctx, const Var& x_prev, const Var& x_t,
                     const Var& x_next) const;
  void collect(ParamList& out) override;
  std::size_t in_channels() const override { return w_x.dim(0); }
  std::size_t out_channels() const override { return w_x.dim(1); }
  const char* kind() const override { return "ftg"; }
  void zero_weights() override;

  Tensor w_x, w_f, w_b, bias;
};

// Dynamical temporal: X_t U_x + Q_next X_{t+1} U_f + Q_prev X_{t-1} U_b + b.
class DtgLayer : public GraphLayer {
 public:
  DtgLayer(const SupportOptions& options, const SkeletonGraph* skeleton,
           std::size_t cin, std::size_t cout, Rng* rng);

  Var preact(ForwardContext& ctx, const Var& x) const override;
  Var preact_triplet(ForwardContext& ctx, const Var& x_prev, const Var& x_t,
                     const Var& x_next) const;
  void collect(ParamList& out) override;
  std::size_t in_channels() const override { return u_x.dim(0); }
  std::size_t out_channels() const override { return u_x.dim(1); }
  const char* kind() const override { return "dtg"; }
  void zero_weights() override;

  SupportOptions options;
  Tensor u_x, u_f, u_b, bias;
  WeightingHead alpha;  // forward (t, t+1)
  WeightingHead beta;   // backward (t, t-1)
  std::shared_ptr<const NeighborTable> static_support;

 private:
  std::shared_ptr<const NeighborTable> support_for(
      ForwardContext& ctx, const Tensor& x_t, const Tensor& x_adj,
      TemporalDirection dir) const;
};

// Spatial and temporal layers summed before the nonlinearity.
class SpatioTemporalLayer : public GraphLayer {
 public:
  SpatioTemporalLayer(std::unique_ptr<GraphLayer> spatial,
                      std::unique_ptr<GraphLayer> temporal);

  Var preact(ForwardContext& ctx, const Var& x) const override;
  void collect(ParamList& out) override;
  std::size_t in_channels() const override { return spatial_->in_channels(); }
  std::size_t out_channels() const override { return spatial_->out_channels(); }
  const char* kind() const override { return "st"; }
  void zero_weights() override;

 private:
  std::unique_ptr<GraphLayer> spatial_;
  std::unique_ptr<GraphLayer> temporal_;
};

// x + W_out softmax(q k^T / sqrt(C')) v + b_out, per frame, C' = C / 2.
class NonLocalLayer {
 public:
  NonLocalLayer(std::size_t channels, Rng* rng);

  Var forward(ForwardContext& ctx, const Var& x) const;
  void collect(ParamList& out);
  // Zeroes the output projection; the layer becomes x + b_out.
  void zero_output() { std::fill(w_out.data().begin(), w_out.data().end(), 0.0); }
  std::size_t channels() const { return w_q.dim(0); }
  std::size_t inner() const { return w_q.dim(1); }

  Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_out, b_out;
};

// out = skip(in) + conv2(relu(conv1(in))); skip is the identity when the
// channel counts agree and a learned projection otherwise.
class ResidualModule {
 public:
  ResidualModule(std::unique_ptr<GraphLayer> conv1,
                 std::unique_ptr<GraphLayer> conv2, Rng* rng);

  Var forward(ForwardContext& ctx, const Var& x) const;
  void collect(ParamList& out);
  // conv2 weights to zero: the module starts as skip(in) + conv2 bias.
  void zero_branch() { conv2_->zero_weights(); }
  const GraphLayer& conv1() const { return *conv1_; }
  const GraphLayer& conv2() const { return *conv2_; }

 private:
  std::unique_ptr<GraphLayer> conv1_;
  std::unique_ptr<GraphLayer> conv2_;
  Tensor skip_;  // empty when identity
};

enum class LayerType { kFsg, kDsg, kFtg, kDtg };
const char* to_string(LayerType t);
LayerType parse_layer_type(const std::string& s);
bool is_spatial(LayerType t);

struct LayerOptions {
  const SkeletonGraph* skeleton = nullptr;
  std::shared_ptr<const Tensor> fixed_affinity;  // for FSG
  SupportOptions spatial{ConnectionStyle::kDynamical, HeadActivation::kSigmoid,
                         3, false};
  SupportOptions temporal{ConnectionStyle::kDynamical, HeadActivation::kSigmoid,
                          4, true};
};

std::unique_ptr<GraphLayer> make_layer(LayerType type, std::size_t cin,
                                       std::size_t cout,
                                       const LayerOptions& options, Rng* rng);

// Uniform(+-1/sqrt(fan_in)) fill; no-op without rng.
void init_uniform(Tensor& t, std::size_t fan_in, Rng* rng);

}  // namespace dgnet

#endif  // DGNET_GRAPH_CONV_HPP_
