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


#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dgnet/ablation.hpp"
#include "dgnet/error.hpp"

namespace dgnet {
namespace {

AblationBudget tiny_budget() {
  AblationBudget b;
  b.sequences = 12;
  b.frames = 8;
  b.channels = 4;
  b.epochs = 1;
  b.batch = 8;
  return b;
}

std::vector<AblationCell> tiny_cells(AblationAxis axis) {
  return ablation_cells(axis, tiny_budget(), budget_variant(tiny_budget()));
}

TEST(AblationAxes, NamesRoundTrip) {
  for (AblationAxis a : all_ablation_axes()) EXPECT_EQ(parse_ablation_axis(to_string(a)), a);
  EXPECT_EQ(all_ablation_axes().size(), 10u);
  EXPECT_THROW(parse_ablation_axis("dropout"), ConfigError);
}

TEST(AblationCells, EveryCellBuildsAndLabelsAreUnique) {
  const SkeletonGraph s = SkeletonGraph::human36m17();
  for (AblationAxis a : all_ablation_axes()) {
    const auto cells = tiny_cells(a);
    EXPECT_GE(cells.size(), 2u) << to_string(a);
    std::set<std::string> labels;
    for (const AblationCell& c : cells) {
      EXPECT_TRUE(labels.insert(c.group + "/" + c.label).second) << c.label;
      EXPECT_NO_THROW(configure_variant(c.spec, s)) << to_string(a) << " " << c.label;
      EXPECT_EQ(c.spec.channels, 4u);
    }
  }
}

TEST(AblationCells, AxesVaryWhatTheyName) {
  const auto styles = tiny_cells(AblationAxis::kConnectionStyle);
  std::set<ConnectionStyle> seen;
  for (const auto& c : styles) seen.insert(c.spec.connection_style);
  EXPECT_EQ(seen.size(), 6u);

  const auto k = tiny_cells(AblationAxis::kK);
  for (const auto& c : k) {
    if (c.group == "K in DSG") EXPECT_EQ(c.spec.k_temporal, 4u);
    if (c.group == "K in DTG") EXPECT_EQ(c.spec.k_spatial, 3u);
  }

  const auto sup = tiny_cells(AblationAxis::kSupervision);
  ASSERT_EQ(sup.size(), 2u);
  EXPECT_NE(sup[0].train.supervision, sup[1].train.supervision);

  const auto coord = tiny_cells(AblationAxis::kCoordinate);
  ASSERT_EQ(coord.size(), 2u);
  EXPECT_EQ(coord[0].spec, coord[1].spec);
  EXPECT_NE(coord[0].eval.balance, coord[1].eval.balance);
}

TEST(AblationRun, TinySweepWritesATable) {
  const SkeletonGraph s = SkeletonGraph::human36m17();
  const AblationBudget b = tiny_budget();
  const auto data = generate_synthetic(40, b.frames, s, 3);
  std::ostringstream progress;
  const auto rows = run_ablation(AblationAxis::kCoordinate, b, data, s, &progress);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].params, rows[1].params);
  for (const AblationRow& r : rows) EXPECT_GT(r.val.mpjpe, 0.0);
  std::ostringstream table;
  write_ablation_table(table, AblationAxis::kCoordinate, rows);
  const std::string text = table.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "axis\tgroup\tvariant\tparams\tval_mpjpe_mm\tval_p_mpjpe_mm\tframes");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(AblationRun, EmptySplitsAreValidationErrors) {
  const SkeletonGraph s = SkeletonGraph::human36m17();
  EXPECT_THROW(run_ablation(AblationAxis::kNonlocal, tiny_budget(), {}, s), ValidationError);
  AblationBudget bad = tiny_budget();
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace dgnet
