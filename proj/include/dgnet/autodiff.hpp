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

// Define-by-run reverse-mode differentiation.
//
// A Tape records every operation in execution order together with a closure
// that maps the output gradient to input gradients. backward() walks the
// record in exact reverse order. The tape is rebuilt for each forward pass;
// one tape belongs to one thread.
//
// Broadcasting is limited to two cases: a scalar operand, and an operand whose
// shape equals the trailing dimensions of the other (a bias row added to every
// leading index).

#ifndef DGNET_AUTODIFF_HPP_
#define DGNET_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgnet/neighbors.hpp"
#include "dgnet/tensor.hpp"

namespace dgnet {

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid after the tape is reset.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
  // Gradient of the last backward root w.r.t. this node; empty when the node
  // was not reached or does not require gradients.
  std::span<const double> grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

class Tape {
 public:
  // Receives the node's output gradient and output value; pushes
  // contributions to inputs through grad_buffer / accumulate_grad.
  using BackwardFn = std::function<void(Tape&, std::span<const double> grad_out,
                                        const Tensor& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives a gradient.
  Var constant(Tensor value);
  // A leaf that references `tensor` without copying it. When the tensor
  // requires grad, backward() adds the leaf gradient into tensor.grad().
  // `tensor` must outlive the tape's use.
  Var leaf(Tensor& tensor);
  // Leaf with an explicit gradient destination (per-thread gradient buffers).
  Var leaf(const Tensor& tensor, std::span<double> grad_sink);
  // A reference to `tensor` that never receives a gradient.
  Var view(const Tensor& tensor);

  void backward(const Var& root);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  // When on, every recorded output is checked and a NumericError naming the
  // operation and scope is thrown at the first non-finite value.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }
  // When on, every relu folds its activation pattern into kink_signature().
  // Two passes with equal signatures lie in the same smooth piece of the
  // function, which is what a finite-difference probe needs.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool track_kinks() const { return track_kinks_; }
  std::uint64_t kink_signature() const { return kink_signature_; }
  void note_kinks(std::span<const double> relu_input);

  // Label of the innermost open Scope ("" at top level).
  const std::string& scope_name() const { return scopes_[current_scope_]; }

  // RAII label attached to every node recorded while it is alive; used in
  // diagnostics ("block2/dtg/conv1: sigmoid produced NaN").
  class Scope {
   public:
    Scope(Tape& tape, std::string_view name);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape& tape_;
    std::uint32_t previous_;
  };

  // --- Op authoring interface -------------------------------------------
  // Records an output. `inputs` are the node ids the backward closure may
  // push gradients into; the closure is dropped when none of them needs one.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
             const char* op);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn,
             const char* op);
  // Adds `g` into the gradient buffer of `v` (allocating it on first use).
  void accumulate_grad(const Var& v, std::span<const double> g);
  // Mutable gradient buffer of `v`, zero-initialised on first use.
  std::span<double> grad_buffer(const Var& v);
  const Tensor& value_of(const Var& v) const;
  bool requires_grad(const Var& v) const;
  std::span<const double> grad_of(const Var& v) const;
  void check_owner(const Var& v, const char* what) const;

  std::string describe(std::size_t id) const;

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
    std::span<double> sink;
    const char* op = "";
    std::uint32_t scope = 0;
    const Tensor& value() const { return ref ? *ref : owned; }
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::vector<std::string> scopes_{""};
  std::uint32_t current_scope_ = 0;
  std::uint64_t generation_ = 1;
  bool backward_done_ = false;
  bool check_finite_ = false;
  bool track_kinks_ = false;
  std::uint64_t kink_signature_ = 0xCBF29CE484222325ULL;
};

// ---- Operations ------------------------------------------------------------

// a[..., k] x b[k, n] -> [..., n]. Leading dimensions of `a` are flattened.
Var matmul(const Var& a, const Var& b);
// sum_t inputs[t] x weights[t] + bias in one node. Inputs share their leading
// dimensions; `bias` ([n]) may be an invalid Var for no bias. Equivalent to the
// chain of matmul and add with the same left-to-right summation order.
Var linear(const std::vector<Var>& inputs, const std::vector<Var>& weights,
           const Var& bias = Var());
// Batched product over a leading frame axis. a is [F, m, k] or a shared
// [m, k]; b is [F, k, n] (or [F, n, k] with trans_b). Result [F, m, n].
Var bmm(const Var& a, const Var& b, bool trans_b = false);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var concat_lastdim(const std::vector<Var>& parts);
Var reshape(const Var& a, Shape shape);
// Rows of `a` along axis 0 picked by `rows` (duplicates allowed).
Var index_select(const Var& a, std::vector<std::size_t> rows);
Var softmax_lastdim(const Var& a);

// Sparse pair ops over a NeighborTable with F frames, N joints, width K.
// score[f, i, k] = s[f, i] + r[f, table(f, i, k)]; s and r hold F*N values.
Var pair_sum(const Var& s, const Var& r,
             std::shared_ptr<const NeighborTable> table);
// score[f, i, k] = <q[f, i, :], p[f, table(f, i, k), :]>; q, p are [F, N, C].
Var pair_dot(const Var& q, const Var& p,
             std::shared_ptr<const NeighborTable> table);
// Softmax over the occupied slots of each row of a [F, N, K] score tensor.
Var pair_softmax(const Var& scores, std::shared_ptr<const NeighborTable> table);
// out[f, i, :] = sum_k w[f, i, k] * x[f, table(f, i, k), :]; x is [F, N, C].
// Same result as scatter_pairs followed by bmm, without the dense matrix.
Var pair_aggregate(const Var& weights, const Var& x,
                   std::shared_ptr<const NeighborTable> table);
// Dense [F, N, N] matrix with value[f, i, k] at column table(f, i, k).
Var scatter_pairs(const Var& values,
                  std::shared_ptr<const NeighborTable> table);

}  // namespace dgnet

#endif  // DGNET_AUTODIFF_HPP_
