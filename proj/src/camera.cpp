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

#include "dgnet/camera.hpp"

#include <cmath>

#include "dgnet/error.hpp"

namespace dgnet {

void Intrinsics::validate() const {
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw ConfigError("camera focal length must be > 0");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw ConfigError("camera principal point must be finite");
  }
}

}  // namespace dgnet
