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

// Joint topology. The edge list defines the fixed spatial support; mirror
// pairs (left/right counterparts) serve the symmetry connection style; rest
// offsets give the synthetic generator a bone layout.

#ifndef DGNET_SKELETON_HPP_
#define DGNET_SKELETON_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dgnet {

using JointPair = std::pair<int, int>;

struct SkeletonGraph {
  std::size_t joint_count = 0;
  std::vector<JointPair> edges;
  std::vector<std::string> names;         // empty or joint_count labels
  std::vector<JointPair> mirror_pairs;    // may be empty
  int root = 0;
  // Per joint: offset from its parent in a y-up body frame, millimeters.
  // Empty or joint_count entries; the root's entry is ignored.
  std::vector<std::array<double, 3>> rest_offsets;

  // Throws ConfigError on out-of-range indices, self-loops, duplicate edges,
  // disconnected graphs or size mismatches.
  void validate() const;

  // Per-joint neighbor lists over `edges`, ascending.
  std::vector<std::vector<int>> adjacency() const;
  // Parent of each joint in the BFS tree rooted at `root` (-1 for the root),
  // and a topological order starting at the root.
  std::vector<int> parents() const;
  std::vector<int> topological_order() const;
  // Mirror partner of each joint, or the joint itself when it has none.
  std::vector<int> mirror_map() const;

  // The 17-joint Human3.6M layout.
  static SkeletonGraph human36m17();

  friend bool operator==(const SkeletonGraph&, const SkeletonGraph&) = default;
};

// Text form (see docs/formats.md):
//   joint_count = 17
//   names = hip r_hip ...
//   edges = 0-1 1-2 ...
//   mirror_pairs = 1-4 ...
//   root = 0
//   rest_offsets = 0,0,0 -130,0,0 ...
SkeletonGraph parse_skeleton(std::string_view text);
SkeletonGraph load_skeleton(const std::filesystem::path& path);
std::string format_skeleton(const SkeletonGraph& skeleton);

}  // namespace dgnet

#endif  // DGNET_SKELETON_HPP_
