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

// Named parameter lists, per-worker gradient buffers, and the binder that
// turns parameter tensors into tape leaves.

#ifndef DGNET_PARAMS_HPP_
#define DGNET_PARAMS_HPP_

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgnet/autodiff.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

class ParamList {
 public:
  void add(std::string name, Tensor& tensor);
  // Appends every entry of `other` with `prefix + "."` prepended.
  void extend(const std::string& prefix, const ParamList& other);

  std::size_t size() const { return items_.size(); }
  const NamedParam& operator[](std::size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  // Total number of scalar parameters.
  std::size_t scalar_count() const;
  // nullptr when absent.
  Tensor* find(const std::string& name) const;

 private:
  std::vector<NamedParam> items_;
};

// One flat gradient array laid out like a ParamList.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamList& params);

  std::size_t size() const { return offsets_.size(); }
  std::span<double> operator[](std::size_t i);
  std::span<const double> operator[](std::size_t i) const;
  // Sink for `param`, or an empty span when it is not in the list.
  std::span<double> sink(const Tensor& param);
  std::span<const double> flat() const { return data_; }

  void zero();
  void add(const GradBuffer& other);
  bool all_finite() const;

 private:
  std::vector<double> data_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> sizes_;
  std::unordered_map<const Tensor*, std::size_t> index_;
};

// Binds each parameter once per tape. Without a gradient buffer the leaves
// are plain views.
class ParamBinder {
 public:
  explicit ParamBinder(Tape& tape, GradBuffer* grads = nullptr)
      : tape_(tape), grads_(grads) {}

  Var operator()(const Tensor& param);
  Tape& tape() const { return tape_; }

 private:
  Tape& tape_;
  GradBuffer* grads_;
  std::unordered_map<const Tensor*, Var> bound_;
};

}  // namespace dgnet

#endif  // DGNET_PARAMS_HPP_
