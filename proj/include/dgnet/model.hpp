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

// The lifting network: an FSG embedding of the 2D input, a chain of DG-Conv
// blocks, a 3D head per block, and a head on the concatenated block features.

#ifndef DGNET_MODEL_HPP_
#define DGNET_MODEL_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgnet/affinity.hpp"
#include "dgnet/autodiff.hpp"
#include "dgnet/camera.hpp"
#include "dgnet/graph_conv.hpp"
#include "dgnet/params.hpp"
#include "dgnet/skeleton.hpp"

namespace dgnet {

enum class DgForm { kFactorized, kUnified };
const char* to_string(DgForm f);
DgForm parse_dg_form(const std::string& s);

struct VariantSpec {
  std::vector<LayerType> spatial_stack{LayerType::kFsg, LayerType::kDsg};
  std::vector<LayerType> temporal_stack{LayerType::kFtg, LayerType::kDtg,
                                        LayerType::kFtg};
  ConnectionStyle connection_style = ConnectionStyle::kDynamical;
  HeadActivation weighting = HeadActivation::kSigmoid;
  std::size_t blocks = 5;
  std::size_t frames = 4;
  std::size_t k_spatial = 3;
  std::size_t k_temporal = 4;
  DgForm form = DgForm::kFactorized;
  std::size_t channels = 128;
  bool nonlocal = true;
  bool spatial_include_self = false;
  bool temporal_include_self = true;
  bool self_loops = true;
  bool row_normalize = true;
  // Start every residual branch (conv2) and non-local output projection at
  // zero, so each block is the identity map at initialization.
  bool zero_init_branches = true;
  // Millimeters per unit of raw network output.
  double output_scale = 1000.0;
  std::uint64_t seed = 1;

  void validate(std::size_t joints) const;
  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

std::string stack_string(const std::vector<LayerType>& stack);  // "FSG+DSG"
std::vector<LayerType> parse_stack(const std::string& s);

struct ForwardOptions {
  bool block_heads = true;
  SupportCache* cache = nullptr;
  AffinityRecorder* recorder = nullptr;
};

struct ModelOutput {
  std::vector<Var> block_preds;     // [F x N x 3] each, millimeters
  Var network_pred;                 // [F x N x 3]
  std::vector<Var> block_features;  // [F x N x C] each
};

class DgNetModel {
 public:
  DgNetModel(const VariantSpec& spec, const SkeletonGraph& skeleton);
  DgNetModel(const DgNetModel&) = delete;
  DgNetModel& operator=(const DgNetModel&) = delete;

  // pose2d: [B x T x N x 2] normalized image coordinates ((u - c) / f).
  // Outputs are root-relative camera coordinates for all B*T frames.
  ModelOutput forward(Tape& tape, ParamBinder& params, const Tensor& pose2d,
                      const ForwardOptions& options = {}) const;

  const ParamList& parameters() const { return params_; }
  // All parameters, or only those used at test time (block heads excluded).
  std::size_t parameter_count(bool train_phase = true) const;

  const VariantSpec& variant() const { return spec_; }
  const SkeletonGraph& skeleton() const { return skeleton_; }
  const Tensor& fixed_affinity() const { return *fixed_affinity_; }

 private:
  struct Unit {
    std::string name;
    std::vector<std::string> module_names;
    std::vector<ResidualModule> modules;
    std::optional<NonLocalLayer> nonlocal;
  };
  struct Block {
    std::vector<Unit> units;
    std::unique_ptr<FsgLayer> head;
  };

  void build(Rng& rng);
  void collect();

  VariantSpec spec_;
  SkeletonGraph skeleton_;
  std::shared_ptr<const Tensor> fixed_affinity_;
  std::unique_ptr<FsgLayer> embed_;
  std::vector<Block> blocks_;
  Tensor head_w_;
  Tensor head_b_;
  ParamList params_;
};

std::unique_ptr<DgNetModel> configure_variant(const VariantSpec& spec,
                                              const SkeletonGraph& skeleton);

// ---- Loss -----------------------------------------------------------------

struct LossReport {
  double network_loss = 0.0;
  std::vector<double> block_losses;
  double total = 0.0;
};

struct LossVars {
  Var total;
  Var network;
  std::vector<Var> blocks;

  LossReport report() const;
};

// Sum of squared errors over frames and joints, divided by `batch`; the total
// adds lambda times the sum of the block losses.
LossVars loss(const ModelOutput& out, const Var& target, double lambda,
              std::size_t batch = 1);
LossReport loss(const std::vector<Tensor>& block_preds,
                const Tensor& network_pred, const Tensor& target,
                double lambda);

// Averages X, Y of pred_cam with Z (U - c_x) / f, Z (V - c_y) / f, where U, V
// are the first two channels of pred_uvd. Both are [.. x 3]; Z comes from
// pred_cam.
Tensor balance_coordinates(const Tensor& pred_cam, const Tensor& pred_uvd,
                           const Intrinsics& intrinsics);

}  // namespace dgnet

#endif  // DGNET_MODEL_HPP_
