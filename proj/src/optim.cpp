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

#include "dgnet/optim.hpp"

#include <cmath>

#include "dgnet/error.hpp"

namespace dgnet {
namespace {

void check_finite(const std::string& name, std::span<const double> g) {
  for (double x : g) {
    if (!std::isfinite(x)) {
      throw NumericError("adam: non-finite gradient in '" + name + "'");
    }
  }
}

}  // namespace

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0) || !(decay > 0.0)) {
    throw ConfigError(
        "adam: need lr >= 0, betas in [0, 1), eps > 0 and decay > 0");
  }
}

Adam::Adam(const ParamList& params, const AdamConfig& config)
    : params_(params), config_(config), lr_(config.lr) {
  config_.validate();
  for (const NamedParam& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step(const GradBuffer& grads) {
  if (grads.size() != params_.size()) {
    throw ValidationError("adam: gradient buffer has " +
                          std::to_string(grads.size()) + " entries for " +
                          std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grads[i].size() != params_[i].tensor->size()) {
      throw ValidationError("adam: missing gradient for '" + params_[i].name + "'");
    }
    check_finite(params_[i].name, grads[i]);
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) update(i, grads[i]);
}

void Adam::step() {
  for (const NamedParam& p : params_) {
    if (!p.tensor->has_grad()) {
      throw ValidationError("adam: missing gradient for '" + p.name + "'");
    }
    check_finite(p.name, p.tensor->grad());
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    update(i, params_[i].tensor->grad());
  }
}

void Adam::update(std::size_t i, std::span<const double> g) {
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  Tensor& w = *params_[i].tensor;
  std::vector<double>& m = m_[i];
  std::vector<double>& v = v_[i];
  for (std::size_t k = 0; k < g.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
    const double mhat = m[k] / c1, vhat = v[k] / c2;
    w[k] -= lr_ * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

}  // namespace dgnet
