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

#include "dgnet/config.hpp"
#include "dgnet/error.hpp"
#include "dgnet/skeleton.hpp"

namespace dgnet {
namespace {

TEST(KeyValueFile, ParsesCommentsBlanksAndTypes) {
  const KeyValueFile f = KeyValueFile::parse("# run\n\nepochs = 3\n lr=0.5  # step\nok = true\n");
  EXPECT_EQ(f.get_int("epochs"), 3);
  EXPECT_DOUBLE_EQ(f.get_double("lr"), 0.5);
  EXPECT_TRUE(f.get_bool("ok"));
  EXPECT_FALSE(f.has("missing"));
  EXPECT_THROW(f.get_string("missing"), ConfigError);
}

TEST(KeyValueFile, Errors) {
  EXPECT_THROW(KeyValueFile::parse("a = 1\na = 2\n"), ParseError);
  try {
    KeyValueFile::parse("ok = 1\nno equals sign\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  const KeyValueFile f = KeyValueFile::parse("x = 1.5\ny = maybe\n");
  EXPECT_THROW(f.get_int("x"), ConfigError);
  EXPECT_THROW(f.get_bool("y"), ConfigError);
  try {
    f.reject_unknown({"x"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos) << e.what();
  }
}

TEST(Conversions, AreStrict) {
  EXPECT_EQ(parse_int("42", "n"), 42);
  EXPECT_THROW(parse_int("42x", "n"), ConfigError);
  EXPECT_THROW(parse_double("", "v"), ConfigError);
  EXPECT_THROW(parse_double("nan", "v"), ConfigError);
  EXPECT_EQ(split_ws("  a b\tc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(trim("  x "), "x");
}

TEST(Skeleton, Human36mLayout) {
  const SkeletonGraph s = SkeletonGraph::human36m17();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.joint_count, 17u);
  EXPECT_EQ(s.names.size(), 17u);
  EXPECT_EQ(s.root, 0);
  const auto mirror = s.mirror_map();
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(mirror[mirror[i]], int(i));
  const auto order = s.topological_order();
  const auto parent = s.parents();
  std::vector<bool> seen(17, false);
  for (int j : order) {
    if (parent[j] >= 0) EXPECT_TRUE(seen[parent[j]]);
    seen[j] = true;
  }
}

TEST(Skeleton, TextRoundTrip) {
  const SkeletonGraph s = SkeletonGraph::human36m17();
  EXPECT_EQ(parse_skeleton(format_skeleton(s)), s);
}

TEST(Skeleton, ShippedFileMatchesBuiltIn) {
  const SkeletonGraph s = load_skeleton(DGNET_DATA_DIR "/h36m17.skeleton");
  EXPECT_EQ(format_skeleton(s), format_skeleton(SkeletonGraph::human36m17()));
}

TEST(Skeleton, ValidationErrors) {
  SkeletonGraph s;
  s.joint_count = 3;
  s.edges = {{0, 1}, {1, 1}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.edges = {{0, 1}, {1, 3}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.edges = {{0, 1}, {1, 0}, {1, 2}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.edges = {{0, 1}};
  EXPECT_THROW(s.validate(), ConfigError);
  s.edges = {{0, 1}, {1, 2}};
  s.names = {"a", "b"};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_skeleton("joint_count = 2\nedges = 0-1\nbogus = 1\n"), ConfigError);
}

}  // namespace
}  // namespace dgnet
