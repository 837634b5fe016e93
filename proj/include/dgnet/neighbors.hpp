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

#ifndef DGNET_NEIGHBORS_HPP_
#define DGNET_NEIGHBORS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dgnet {

// Batched sparse support: for each of `frames` frames and each of `joints`
// rows, up to `width` column indices. Unused slots hold kEmpty. This is the
// discrete half of an affinity; it never participates in differentiation.
struct NeighborTable {
  static constexpr std::int32_t kEmpty = -1;

  std::size_t frames = 0;
  std::size_t joints = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> index;

  NeighborTable() = default;
  NeighborTable(std::size_t f, std::size_t n, std::size_t k)
      : frames(f), joints(n), width(k), index(f * n * k, kEmpty) {}

  std::span<std::int32_t> row(std::size_t frame, std::size_t joint) {
    return {index.data() + (frame * joints + joint) * width, width};
  }
  std::span<const std::int32_t> row(std::size_t frame, std::size_t joint) const {
    return {index.data() + (frame * joints + joint) * width, width};
  }
  std::size_t row_count(std::size_t frame, std::size_t joint) const {
    std::size_t c = 0;
    for (std::int32_t j : row(frame, joint)) c += (j != kEmpty);
    return c;
  }

  friend bool operator==(const NeighborTable&, const NeighborTable&) = default;
};

}  // namespace dgnet

#endif  // DGNET_NEIGHBORS_HPP_
