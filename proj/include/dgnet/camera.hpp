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

// Pinhole camera.

#ifndef DGNET_CAMERA_HPP_
#define DGNET_CAMERA_HPP_

namespace dgnet {

struct Intrinsics {
  double f = 1145.0;
  double cx = 512.0;
  double cy = 515.0;

  void validate() const;
  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

// U = f X / Z + c_x, V = f Y / Z + c_y.
inline void project(const Intrinsics& k, const double* xyz, double* uv) {
  uv[0] = k.f * xyz[0] / xyz[2] + k.cx;
  uv[1] = k.f * xyz[1] / xyz[2] + k.cy;
}

// Inverse of project() given the depth.
inline void back_project(const Intrinsics& k, const double* uv, double z,
                         double* xyz) {
  xyz[0] = z * (uv[0] - k.cx) / k.f;
  xyz[1] = z * (uv[1] - k.cy) / k.f;
  xyz[2] = z;
}

}  // namespace dgnet

#endif  // DGNET_CAMERA_HPP_
