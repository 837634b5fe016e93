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


// Ablation sweeps: named variant cells trained under one shared budget.

#ifndef DGNET_ABLATION_HPP_
#define DGNET_ABLATION_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dgnet/data.hpp"
#include "dgnet/model.hpp"
#include "dgnet/train.hpp"

namespace dgnet {

enum class AblationAxis {
  kConnectionStyle,
  kWeighting,
  kK,
  kBlocks,
  kFrames,
  kDgForm,
  kSupervision,
  kUnit,
  kNonlocal,
  kCoordinate,
};
const char* to_string(AblationAxis a);
AblationAxis parse_ablation_axis(const std::string& s);
const std::vector<AblationAxis>& all_ablation_axes();

// Desk-scale budget shared by every cell of a sweep.
struct AblationBudget {
  std::size_t sequences = 200;  // synthetic sequences when no dataset is given
  std::size_t frames = 32;      // frames per synthetic sequence
  std::size_t channels = 32;
  std::size_t epochs = 8;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AblationCell {
  std::string group;  // sub-table label, e.g. "K in DSG"
  std::string label;  // row or column label, e.g. "3"
  VariantSpec spec;
  TrainConfig train;
  EvalOptions eval;
};

// Cells of one axis. `base` supplies everything the axis does not vary.
std::vector<AblationCell> ablation_cells(AblationAxis axis,
                                         const AblationBudget& budget,
                                         const VariantSpec& base = {});

// Default variant and training config at the budget's scale.
VariantSpec budget_variant(const AblationBudget& budget);
TrainConfig budget_train_config(const AblationBudget& budget);

struct AblationRow {
  std::string group;
  std::string label;
  std::size_t params = 0;  // training-phase parameter count
  Metrics val;
};

// Trains `cell` on `train_set` and scores it on `val_set`.
AblationRow run_ablation_cell(const AblationCell& cell,
                              const std::vector<PoseSequence>& train_set,
                              const std::vector<PoseSequence>& val_set,
                              const SkeletonGraph& skeleton);

// Runs every cell of `axis`. Cells that differ only in evaluation options
// share one trained model. `progress` receives one line per finished cell.
std::vector<AblationRow> run_ablation(AblationAxis axis, const AblationBudget& budget,
                                      const std::vector<PoseSequence>& data,
                                      const SkeletonGraph& skeleton,
                                      std::ostream* progress = nullptr);

// Tab-separated table with a one-line header.
void write_ablation_table(std::ostream& out, AblationAxis axis,
                          const std::vector<AblationRow>& rows);

}  // namespace dgnet

#endif  // DGNET_ABLATION_HPP_
