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

// Adam with bias correction and a per-epoch exponential learning-rate decay.

#ifndef DGNET_OPTIM_HPP_
#define DGNET_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "dgnet/params.hpp"

namespace dgnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 0.96;  // lr multiplier applied by end_epoch()

  void validate() const;
};

class Adam {
 public:
  Adam(const ParamList& params, const AdamConfig& config);

  // Gradients laid out like the parameter list. Throws ValidationError when
  // the layout does not match or an entry is non-finite.
  void step(const GradBuffer& grads);
  // Uses each parameter tensor's own grad(); parameters without a gradient
  // buffer are an error.
  void step();
  void end_epoch() { lr_ *= config_.decay; }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  void update(std::size_t i, std::span<const double> g);

  const ParamList& params_;
  AdamConfig config_;
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dgnet

#endif  // DGNET_OPTIM_HPP_
