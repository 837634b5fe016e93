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

#include "dgnet/params.hpp"

#include <algorithm>
#include <cmath>

#include "dgnet/error.hpp"

namespace dgnet {

void ParamList::add(std::string name, Tensor& tensor) {
  items_.push_back({std::move(name), &tensor});
}

void ParamList::extend(const std::string& prefix, const ParamList& other) {
  for (const NamedParam& p : other) add(prefix + "." + p.name, *p.tensor);
}

std::size_t ParamList::scalar_count() const {
  std::size_t n = 0;
  for (const NamedParam& p : items_) n += p.tensor->size();
  return n;
}

Tensor* ParamList::find(const std::string& name) const {
  for (const NamedParam& p : items_) {
    if (p.name == name) return p.tensor;
  }
  return nullptr;
}

GradBuffer::GradBuffer(const ParamList& params) {
  std::size_t total = 0;
  for (const NamedParam& p : params) {
    if (index_.count(p.tensor)) {
      throw ValidationError("parameter '" + p.name + "' registered twice");
    }
    index_[p.tensor] = offsets_.size();
    offsets_.push_back(total);
    sizes_.push_back(p.tensor->size());
    total += p.tensor->size();
  }
  data_.assign(total, 0.0);
}

std::span<double> GradBuffer::operator[](std::size_t i) {
  return {data_.data() + offsets_.at(i), sizes_[i]};
}

std::span<const double> GradBuffer::operator[](std::size_t i) const {
  return {data_.data() + offsets_.at(i), sizes_[i]};
}

std::span<double> GradBuffer::sink(const Tensor& param) {
  const auto it = index_.find(&param);
  if (it == index_.end()) return {};
  return (*this)[it->second];
}

void GradBuffer::zero() { std::fill(data_.begin(), data_.end(), 0.0); }

void GradBuffer::add(const GradBuffer& other) {
  if (other.data_.size() != data_.size()) {
    throw DimensionError("gradient buffers of different layouts");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool GradBuffer::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Var ParamBinder::operator()(const Tensor& param) {
  const auto it = bound_.find(&param);
  if (it != bound_.end()) return it->second;
  std::span<double> sink = grads_ ? grads_->sink(param) : std::span<double>{};
  Var v = sink.empty() ? tape_.view(param) : tape_.leaf(param, sink);
  bound_.emplace(&param, v);
  return v;
}

}  // namespace dgnet
