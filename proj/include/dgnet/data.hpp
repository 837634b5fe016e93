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

// Pose sequences: synthetic generation, noise corruption and JSONL storage.

#ifndef DGNET_DATA_HPP_
#define DGNET_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgnet/camera.hpp"
#include "dgnet/skeleton.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet {

struct PoseSequence {
  std::string seq_id;
  std::string action;    // may be empty
  Intrinsics intrinsics;
  Tensor joints3d;       // [T x N x 3], camera coordinates, millimeters
  Tensor joints2d;       // [T x N x 2], pixels

  std::size_t frames() const { return joints3d.dim(0); }
  std::size_t joints() const { return joints3d.dim(1); }
  void validate() const;

  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

struct SynthOptions {
  Intrinsics intrinsics;
  bool actions = true;  // label sequences with a motion style
};

// Motion styles cycle through this list by sequence index.
const std::vector<std::string>& synthetic_actions();

// Deterministic per (seed, index): sequence i is the same whatever `count`.
std::vector<PoseSequence> generate_synthetic(std::size_t count, std::size_t frames,
                                             const SkeletonGraph& skeleton,
                                             std::uint64_t seed,
                                             const SynthOptions& options = {});

struct CorruptionSpec {
  double sigma = 0.0;  // pixels
  std::uint64_t seed = 0;
};

// Adds N(0, sigma^2) to every 2D coordinate. The noise stream depends on the
// seed and the sequence id only.
PoseSequence corrupt_2d(const PoseSequence& seq, const CorruptionSpec& spec);

// One JSON object per line. Blank lines are skipped.
std::vector<PoseSequence> read_dataset(
    const std::filesystem::path& path,
    std::optional<std::size_t> expected_joints = std::nullopt);
std::vector<PoseSequence> parse_dataset(
    const std::string& text,
    std::optional<std::size_t> expected_joints = std::nullopt);
void write_dataset(const std::vector<PoseSequence>& seqs,
                   const std::filesystem::path& path);
std::string format_dataset(const std::vector<PoseSequence>& seqs);

// Max |project(joints3d) - joints2d| over a sequence, pixels.
double projection_residual(const PoseSequence& seq);

}  // namespace dgnet

#endif  // DGNET_DATA_HPP_
