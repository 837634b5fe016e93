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


#include "dgnet/ablation.hpp"

#include <map>
#include <memory>
#include <utility>

#include "dgnet/checkpoint.hpp"
#include "dgnet/error.hpp"

namespace dgnet {

const char* to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::kConnectionStyle: return "connection-style";
    case AblationAxis::kWeighting: return "weighting";
    case AblationAxis::kK: return "K";
    case AblationAxis::kBlocks: return "blocks";
    case AblationAxis::kFrames: return "frames";
    case AblationAxis::kDgForm: return "dg-form";
    case AblationAxis::kSupervision: return "supervision";
    case AblationAxis::kUnit: return "unit";
    case AblationAxis::kNonlocal: return "nonlocal";
    case AblationAxis::kCoordinate: return "coordinate";
  }
  return "?";
}

const std::vector<AblationAxis>& all_ablation_axes() {
  static const std::vector<AblationAxis> axes{
      AblationAxis::kConnectionStyle, AblationAxis::kWeighting,
      AblationAxis::kK,               AblationAxis::kBlocks,
      AblationAxis::kFrames,          AblationAxis::kDgForm,
      AblationAxis::kSupervision,     AblationAxis::kUnit,
      AblationAxis::kNonlocal,        AblationAxis::kCoordinate};
  return axes;
}

AblationAxis parse_ablation_axis(const std::string& s) {
  std::string names;
  for (AblationAxis a : all_ablation_axes()) {
    if (s == to_string(a)) return a;
    names += names.empty() ? "" : ", ";
    names += to_string(a);
  }
  throw ConfigError("unknown ablation axis '" + s + "' (expected " + names + ")");
}

void AblationBudget::validate() const {
  if (sequences == 0) throw ConfigError("ablation budget: sequences must be > 0");
  if (frames < 2) throw ConfigError("ablation budget: frames must be >= 2");
  if (channels == 0) throw ConfigError("ablation budget: channels must be > 0");
  if (epochs == 0) throw ConfigError("ablation budget: epochs must be > 0");
  if (batch == 0) throw ConfigError("ablation budget: batch must be > 0");
  if (!(lr >= 0.0)) throw ConfigError("ablation budget: lr must be >= 0");
}

VariantSpec budget_variant(const AblationBudget& budget) {
  VariantSpec v;
  v.channels = budget.channels;
  v.seed = budget.seed;
  return v;
}

TrainConfig budget_train_config(const AblationBudget& budget) {
  TrainConfig t;
  t.epochs = budget.epochs;
  t.batch = budget.batch;
  t.adam.lr = budget.lr;
  t.seed = budget.seed;
  return t;
}

std::vector<AblationCell> ablation_cells(AblationAxis axis,
                                         const AblationBudget& budget,
                                         const VariantSpec& base) {
  budget.validate();
  std::vector<AblationCell> cells;
  auto add = [&](std::string group, std::string label, auto&& edit) {
    AblationCell c{std::move(group), std::move(label), base,
                   budget_train_config(budget), {}};
    edit(c);
    cells.push_back(std::move(c));
  };
  using S = std::vector<LayerType>;
  const LayerType fsg = LayerType::kFsg, dsg = LayerType::kDsg;
  const LayerType ftg = LayerType::kFtg, dtg = LayerType::kDtg;
  switch (axis) {
    case AblationAxis::kConnectionStyle:
      for (ConnectionStyle s :
           {ConnectionStyle::kRandom, ConnectionStyle::kFixed, ConnectionStyle::kFull,
            ConnectionStyle::kSymmetry, ConnectionStyle::kPrecomputed,
            ConnectionStyle::kDynamical}) {
        add("connection style", to_string(s),
            [&](AblationCell& c) { c.spec.connection_style = s; });
      }
      break;
    case AblationAxis::kWeighting: {
      const std::pair<const char*, HeadActivation> kinds[] = {
          {"W/O", HeadActivation::kUnweighted},
          {"FC", HeadActivation::kSigmoid},
          {"EG", HeadActivation::kEmbeddedGaussian}};
      for (const auto& [label, act] : kinds) {
        add("weighting", label, [&](AblationCell& c) { c.spec.weighting = act; });
      }
      break;
    }
    case AblationAxis::kK:
      for (std::size_t k : {1, 3, 5, 7}) {
        add("K in DSG", std::to_string(k), [&](AblationCell& c) {
          c.spec.k_spatial = k;
          c.spec.k_temporal = 4;
        });
      }
      for (std::size_t k : {1, 3, 5, 7}) {
        add("K in DTG", std::to_string(k), [&](AblationCell& c) {
          c.spec.k_spatial = 3;
          c.spec.k_temporal = k;
        });
      }
      break;
    case AblationAxis::kBlocks:
      for (std::size_t b : {1, 3, 5}) {
        add("DG-Conv blocks", std::to_string(b),
            [&](AblationCell& c) { c.spec.blocks = b; });
      }
      break;
    case AblationAxis::kFrames:
      for (std::size_t t : {2, 3, 4, 5}) {
        add("input frames", std::to_string(t),
            [&](AblationCell& c) { c.spec.frames = t; });
      }
      break;
    case AblationAxis::kDgForm:
      for (DgForm f : {DgForm::kUnified, DgForm::kFactorized}) {
        add("DG form", to_string(f), [&](AblationCell& c) { c.spec.form = f; });
      }
      break;
    case AblationAxis::kSupervision:
      for (Supervision s : {Supervision::kNetwork, Supervision::kTotal}) {
        add("supervision", to_string(s),
            [&](AblationCell& c) { c.train.supervision = s; });
      }
      break;
    case AblationAxis::kUnit:
      for (const S& s : {S{fsg}, S{fsg, dsg}, S{fsg, fsg}, S{fsg, dsg, dsg},
                         S{fsg, dsg, fsg}}) {
        add("dynamical spatial unit", stack_string(s) + " / FTG",
            [&](AblationCell& c) {
              c.spec.spatial_stack = s;
              c.spec.temporal_stack = {ftg};
            });
      }
      for (const S& t :
           {S{ftg}, S{ftg, dtg}, S{ftg, ftg}, S{ftg, dtg, dtg}, S{ftg, dtg, ftg},
            S{ftg, dtg, ftg, dtg}, S{ftg, dtg, ftg, ftg}}) {
        add("dynamical temporal unit", "FSG+DSG / " + stack_string(t),
            [&](AblationCell& c) {
              c.spec.spatial_stack = {fsg, dsg};
              c.spec.temporal_stack = t;
            });
      }
      break;
    case AblationAxis::kNonlocal:
      for (bool on : {false, true}) {
        add("nonlocal", on ? "with" : "without",
            [&](AblationCell& c) { c.spec.nonlocal = on; });
      }
      break;
    case AblationAxis::kCoordinate:
      for (bool on : {false, true}) {
        add("coordinate operation", on ? "balanced" : "non-balanced",
            [&](AblationCell& c) { c.eval.balance = on; });
      }
      break;
  }
  return cells;
}

AblationRow run_ablation_cell(const AblationCell& cell,
                              const std::vector<PoseSequence>& train_set,
                              const std::vector<PoseSequence>& val_set,
                              const SkeletonGraph& skeleton) {
  auto model = configure_variant(cell.spec, skeleton);
  train(*model, train_set, {}, cell.train);
  return {cell.group, cell.label, model->parameter_count(true),
          evaluate(*model, val_set, cell.eval).overall};
}

std::vector<AblationRow> run_ablation(AblationAxis axis, const AblationBudget& budget,
                                      const std::vector<PoseSequence>& data,
                                      const SkeletonGraph& skeleton,
                                      std::ostream* progress) {
  auto [train_set, val_set] = split_validation(data);
  if (train_set.empty() || val_set.empty()) {
    throw ValidationError("ablation needs both training and validation "
                          "sequences; the split left " +
                          std::to_string(train_set.size()) + " and " +
                          std::to_string(val_set.size()));
  }
  // Cells with the same variant and supervision reuse one trained model.
  std::map<std::string, std::unique_ptr<DgNetModel>> trained;
  std::vector<AblationRow> rows;
  for (const AblationCell& cell : ablation_cells(axis, budget, budget_variant(budget))) {
    std::string key = to_string(cell.train.supervision);
    for (const auto& [k, v] : variant_fields(cell.spec)) key += ";" + k + "=" + v;
    auto it = trained.find(key);
    if (it == trained.end()) {
      auto model = configure_variant(cell.spec, skeleton);
      train(*model, train_set, {}, cell.train);
      it = trained.emplace(key, std::move(model)).first;
    }
    const DgNetModel& model = *it->second;
    rows.push_back({cell.group, cell.label, model.parameter_count(true),
                    evaluate(model, val_set, cell.eval).overall});
    if (progress) {
      *progress << to_string(axis) << " " << cell.group << " " << cell.label
                << ": val mpjpe " << rows.back().val.mpjpe << " mm\n";
    }
  }
  return rows;
}

void write_ablation_table(std::ostream& out, AblationAxis axis,
                          const std::vector<AblationRow>& rows) {
  out << "axis\tgroup\tvariant\tparams\tval_mpjpe_mm\tval_p_mpjpe_mm\tframes\n";
  const auto old = out.precision(6);
  for (const AblationRow& r : rows) {
    out << to_string(axis) << '\t' << r.group << '\t' << r.label << '\t' << r.params
        << '\t' << r.val.mpjpe << '\t' << r.val.p_mpjpe << '\t' << r.val.frames
        << '\n';
  }
  out.precision(old);
}

}  // namespace dgnet
