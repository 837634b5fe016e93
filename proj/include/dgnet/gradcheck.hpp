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

// Finite-difference gradient checks for each layer kind and the full model.
//
// Each trial builds a small random instance, takes the analytic gradient of
// sum(output * R) for a fixed random R, and compares sampled coordinates of
// every parameter tensor and of the input against central differences.
// Supports are recorded on the analytic pass and replayed on every probe.
// A probe whose relu activation pattern differs from the analytic pass
// straddles a kink; that coordinate is replaced by another one.

#ifndef DGNET_GRADCHECK_HPP_
#define DGNET_GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dgnet/affinity.hpp"

namespace dgnet {

enum class GradcheckTarget { kFsg, kDsg, kFtg, kDtg, kNonlocal, kFullModel };
const char* to_string(GradcheckTarget t);
GradcheckTarget parse_gradcheck_target(const std::string& s);

struct GradcheckOptions {
  std::size_t trials = 10;
  double tolerance = 1e-4;
  double step = 1e-5;
  double floor = 1e-6;  // denominator floor of the relative error
  // Coordinates probed per tensor (all of them when the tensor is smaller).
  std::size_t samples = 16;
  std::uint64_t seed = 1;
  HeadActivation weighting = HeadActivation::kSigmoid;
  std::size_t model_channels = 8;
};

struct GroupResult {
  std::string name;
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // coordinates replaced because a probe hit a kink
};

struct GradcheckReport {
  std::vector<GroupResult> groups;  // merged over trials
  double worst = 0.0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

GradcheckReport run_gradcheck(GradcheckTarget target, const GradcheckOptions& options);

}  // namespace dgnet

#endif  // DGNET_GRADCHECK_HPP_
