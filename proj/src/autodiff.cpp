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

#include "dgnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dgnet/error.hpp"
#include "dgnet/kernels.hpp"

namespace dgnet {

// ---- Var -------------------------------------------------------------------

Tape& Var::tape() const {
  if (!tape_) throw TapeError("use of an empty Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value_of(*this); }

bool Var::requires_grad() const { return tape().requires_grad(*this); }

std::span<const double> Var::grad() const { return tape().grad_of(*this); }

// ---- Tape ------------------------------------------------------------------

Tape::Scope::Scope(Tape& tape, std::string_view name)
    : tape_(tape), previous_(tape.current_scope_) {
  const std::string& parent = tape.scopes_[previous_];
  tape.scopes_.push_back(parent.empty() ? std::string(name)
                                        : parent + "/" + std::string(name));
  tape.current_scope_ = static_cast<std::uint32_t>(tape.scopes_.size() - 1);
}

Tape::Scope::~Scope() { tape_.current_scope_ = previous_; }

Var Tape::push(Node node) {
  node.scope = current_scope_;
  nodes_.push_back(std::move(node));
  const std::size_t id = nodes_.size() - 1;
  if (check_finite_ && !nodes_.back().value().all_finite()) {
    throw NumericError("non-finite value produced by " + describe(id));
  }
  return Var(this, id, generation_);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::leaf(Tensor& tensor) {
  Node n;
  n.ref = &tensor;
  n.op = "leaf";
  if (tensor.requires_grad()) {
    n.requires_grad = true;
    n.sink = tensor.grad();
  }
  return push(std::move(n));
}

Var Tape::leaf(const Tensor& tensor, std::span<double> grad_sink) {
  if (grad_sink.size() != tensor.size()) {
    throw DimensionError("gradient sink of " + std::to_string(grad_sink.size()) +
                         " values for tensor " + shape_string(tensor.shape()));
  }
  Node n;
  n.ref = &tensor;
  n.op = "leaf";
  n.requires_grad = true;
  n.sink = grad_sink;
  return push(std::move(n));
}

Var Tape::view(const Tensor& tensor) {
  Node n;
  n.ref = &tensor;
  n.op = "view";
  return push(std::move(n));
}

void Tape::check_owner(const Var& v, const char* what) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw TapeError(std::string(what) +
                    ": variable is detached from this tape (foreign tape or "
                    "recorded before reset)");
  }
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
                 const char* op) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn), op);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn,
                 const char* op) {
  bool needs = false;
  for (const Var& in : inputs) {
    check_owner(in, op);
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node n;
  n.owned = std::move(value);
  n.op = op;
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  return push(std::move(n));
}

void Tape::accumulate_grad(const Var& v, std::span<const double> g) {
  std::span<double> buf = grad_buffer(v);
  if (g.size() != buf.size()) {
    throw DimensionError(std::string("gradient of size ") +
                         std::to_string(g.size()) + " for " + describe(v.id_));
  }
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

std::span<double> Tape::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id_];
  if (n.grad.empty()) n.grad.assign(n.value().size(), 0.0);
  return n.grad;
}

const Tensor& Tape::value_of(const Var& v) const {
  check_owner(v, "value");
  return nodes_[v.id_].value();
}

bool Tape::requires_grad(const Var& v) const {
  check_owner(v, "requires_grad");
  return nodes_[v.id_].requires_grad;
}

std::span<const double> Tape::grad_of(const Var& v) const {
  check_owner(v, "grad");
  return nodes_[v.id_].grad;
}

std::string Tape::describe(std::size_t id) const {
  const Node& n = nodes_.at(id);
  std::string s = std::string("op '") + n.op + "'";
  if (!scopes_[n.scope].empty()) s += " in scope '" + scopes_[n.scope] + "'";
  s += " (node " + std::to_string(id) + ", shape " +
       shape_string(n.value().shape()) + ")";
  return s;
}

void Tape::backward(const Var& root) {
  check_owner(root, "backward");
  if (backward_done_) {
    throw TapeError("backward called twice on the same tape without reset");
  }
  if (root.size() != 1) {
    throw TapeError("backward root must be a scalar, got shape " +
                    shape_string(root.shape()));
  }
  backward_done_ = true;
  if (!nodes_[root.id_].requires_grad) return;
  grad_buffer(root)[0] = 1.0;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad, n.value());
    if (!n.sink.empty()) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.sink[i] += n.grad[i];
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  scopes_.assign(1, "");
  current_scope_ = 0;
  ++generation_;
  backward_done_ = false;
  kink_signature_ = 0xCBF29CE484222325ULL;
}

void Tape::note_kinks(std::span<const double> relu_input) {
  std::uint64_t h = kink_signature_;
  for (double v : relu_input) {
    h ^= v > 0.0 ? 1u : 2u;
    h *= 0x100000001B3ULL;
  }
  kink_signature_ = h;
}

// ---- Operations ------------------------------------------------------------

namespace {

Tape& common_tape(const Var& a, const Var& b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw TapeError("operands live on different tapes");
  return t;
}

// Output shape and element periods for the restricted broadcasting rule.
struct Broadcast {
  Shape shape;
  std::size_t period_a;
  std::size_t period_b;
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t na = shape_size(a), nb = shape_size(b);
  if (a == b) return {a, na, nb};
  if (nb == 1) return {a, na, 1};
  if (na == 1) return {b, 1, nb};
  if (is_suffix(b, a)) return {a, na, nb};
  if (is_suffix(a, b)) return {b, na, nb};
  throw DimensionError(std::string(op) + ": cannot broadcast " +
                       shape_string(a) + " with " + shape_string(b));
}

// Visits every output element with the matching operand indices. One period
// always equals the output size; the other one divides it.
template <typename F>
void broadcast_loop(std::size_t n, std::size_t pa, std::size_t pb, F&& f) {
  if (pa == n && pb == n) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
  } else if (pa == n) {
    for (std::size_t base = 0; base < n; base += pb) {
      for (std::size_t j = 0; j < pb; ++j) f(base + j, base + j, j);
    }
  } else {
    for (std::size_t base = 0; base < n; base += pa) {
      for (std::size_t j = 0; j < pa; ++j) f(base + j, j, base + j);
    }
  }
}

template <typename Fwd, typename DA, typename DB>
Var binary(const Var& a, const Var& b, const char* op, Fwd fwd, DA da, DB db) {
  Tape& tape = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = broadcast(av.shape(), bv.shape(), op);
  Tensor out(bc.shape);
  const std::size_t n = out.size();
  {
    const double* x = av.raw();
    const double* y = bv.raw();
    double* o = out.raw();
    broadcast_loop(n, bc.period_a, bc.period_b,
                   [&](std::size_t i, std::size_t ia, std::size_t ib) {
                     o[i] = fwd(x[ia], y[ib]);
                   });
  }
  return tape.record(
      std::move(out), {a, b},
      [a, b, bc, da, db](Tape& t, std::span<const double> g, const Tensor&) {
        const double* x = t.value_of(a).raw();
        const double* y = t.value_of(b).raw();
        const std::size_t n = g.size();
        if (t.requires_grad(a)) {
          double* ga = t.grad_buffer(a).data();
          broadcast_loop(n, bc.period_a, bc.period_b,
                         [&](std::size_t i, std::size_t ia, std::size_t ib) {
                           ga[ia] += g[i] * da(x[ia], y[ib]);
                         });
        }
        if (t.requires_grad(b)) {
          double* gb = t.grad_buffer(b).data();
          broadcast_loop(n, bc.period_a, bc.period_b,
                         [&](std::size_t i, std::size_t ia, std::size_t ib) {
                           gb[ib] += g[i] * db(x[ia], y[ib]);
                         });
        }
      },
      op);
}

std::size_t flat_rows(const Tensor& t, std::size_t cols) {
  return cols ? t.size() / cols : 0;
}

void check_table(const NeighborTable& table, std::size_t count, const char* op) {
  if (table.frames * table.joints != count) {
    throw DimensionError(std::string(op) + ": neighbor table covers " +
                         std::to_string(table.frames) + "x" +
                         std::to_string(table.joints) + " rows but operand has " +
                         std::to_string(count));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.rank() < 1 || av.shape().back() != bv.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree for " +
                         shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  const std::size_t k = bv.dim(0), n = bv.dim(1);
  const std::size_t m = flat_rows(av, k);
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  kernels::gemm(false, false, m, n, k, av.raw(), k, bv.raw(), n, out.raw(), n,
                false);
  return tape.record(
      std::move(out), {a, b},
      [a, b, m, n, k](Tape& t, std::span<const double> g, const Tensor&) {
        if (t.requires_grad(a)) {
          kernels::gemm(false, true, m, k, n, g.data(), n, t.value_of(b).raw(), n,
                        t.grad_buffer(a).data(), k, true);
        }
        if (t.requires_grad(b)) {
          kernels::gemm(true, false, k, n, m, t.value_of(a).raw(), k, g.data(), n,
                        t.grad_buffer(b).data(), n, true);
        }
      },
      "matmul");
}

Var linear(const std::vector<Var>& inputs, const std::vector<Var>& weights,
           const Var& bias) {
  if (inputs.empty() || inputs.size() != weights.size()) {
    throw DimensionError("linear: needs one weight per input");
  }
  Tape& tape = inputs[0].tape();
  const Shape& xs = inputs[0].shape();
  const std::size_t n = weights[0].shape().size() == 2 ? weights[0].shape()[1] : 0;
  std::vector<std::size_t> ks;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor& xv = inputs[t].value();
    const Tensor& wv = weights[t].value();
    if (&inputs[t].tape() != &tape || &weights[t].tape() != &tape) {
      throw TapeError("operands live on different tapes");
    }
    if (wv.rank() != 2 || xv.rank() < 1 || xv.shape().back() != wv.dim(0) ||
        wv.dim(1) != n || shape_size(xv.shape()) / wv.dim(0) !=
                              shape_size(xs) / xs.back()) {
      throw DimensionError("linear: term " + std::to_string(t) + " has " +
                           shape_string(xv.shape()) + " x " +
                           shape_string(wv.shape()));
    }
    ks.push_back(wv.dim(0));
  }
  const std::size_t m = shape_size(xs) / xs.back();
  if (bias.valid()) {
    if (&bias.tape() != &tape) throw TapeError("operands live on different tapes");
    if (bias.size() != n) {
      throw DimensionError("linear: bias " + shape_string(bias.shape()) +
                           " for " + std::to_string(n) + " outputs");
    }
  }
  Shape out_shape = xs;
  out_shape.back() = n;
  Tensor out(out_shape);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    kernels::gemm(false, false, m, n, ks[t], inputs[t].value().raw(), ks[t],
                  weights[t].value().raw(), n, out.raw(), n, t > 0);
  }
  if (bias.valid()) {
    const double* b = bias.value().raw();
    double* o = out.raw();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t j = 0; j < n; ++j) o[r * n + j] += b[j];
    }
  }
  std::vector<Var> deps = inputs;
  deps.insert(deps.end(), weights.begin(), weights.end());
  if (bias.valid()) deps.push_back(bias);
  return tape.record(
      std::move(out), deps,
      [inputs, weights, bias, ks, m, n](Tape& t, std::span<const double> g,
                                        const Tensor&) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          const std::size_t k = ks[i];
          if (t.requires_grad(inputs[i])) {
            kernels::gemm(false, true, m, k, n, g.data(), n,
                          t.value_of(weights[i]).raw(), n,
                          t.grad_buffer(inputs[i]).data(), k, true);
          }
          if (t.requires_grad(weights[i])) {
            kernels::gemm(true, false, k, n, m, t.value_of(inputs[i]).raw(), k,
                          g.data(), n, t.grad_buffer(weights[i]).data(), n, true);
          }
        }
        if (bias.valid() && t.requires_grad(bias)) {
          double* gb = t.grad_buffer(bias).data();
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
          }
        }
      },
      "linear");
}

namespace {

// [F, r, c] <-> [r, F * c]; element (f, i, j) <-> (i, f * c + j).
std::vector<double> frames_to_columns(const double* src, std::size_t frames,
                                      std::size_t rows, std::size_t cols) {
  std::vector<double> wide(frames * rows * cols);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(src + (f * rows + i) * cols, cols,
                  wide.data() + i * frames * cols + f * cols);
    }
  }
  return wide;
}

void add_columns_to_frames(const double* wide, std::size_t frames,
                           std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* s = wide + i * frames * cols + f * cols;
      double* d = dst + (f * rows + i) * cols;
      for (std::size_t j = 0; j < cols; ++j) d[j] += s[j];
    }
  }
}

// A shared [m, k] matrix times every frame of [F, k, n], as one wide product.
Var bmm_shared(const Var& a, const Var& b, std::size_t frames, std::size_t m,
               std::size_t k, std::size_t n) {
  const std::size_t wn = frames * n;
  const std::vector<double> bw = frames_to_columns(b.value().raw(), frames, k, n);
  std::vector<double> cw(m * wn);
  kernels::gemm(false, false, m, wn, k, a.value().raw(), k, bw.data(), wn,
                cw.data(), wn, false);
  Tensor out({frames, m, n});
  add_columns_to_frames(cw.data(), frames, m, n, out.raw());
  return a.tape().record(
      std::move(out), {a, b},
      [a, b, frames, m, n, k, wn](Tape& t, std::span<const double> g,
                                  const Tensor&) {
        const std::vector<double> gw = frames_to_columns(g.data(), frames, m, n);
        if (t.requires_grad(a)) {
          const std::vector<double> yw =
              frames_to_columns(t.value_of(b).raw(), frames, k, n);
          kernels::gemm(false, true, m, k, wn, gw.data(), wn, yw.data(), wn,
                        t.grad_buffer(a).data(), k, true);
        }
        if (t.requires_grad(b)) {
          std::vector<double> dbw(k * wn);
          kernels::gemm(true, false, k, wn, m, t.value_of(a).raw(), k, gw.data(),
                        wn, dbw.data(), wn, false);
          add_columns_to_frames(dbw.data(), frames, k, n,
                                t.grad_buffer(b).data());
        }
      },
      "bmm");
}

}  // namespace

Var bmm(const Var& a, const Var& b, bool trans_b) {
  Tape& tape = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 3 || (av.rank() != 2 && av.rank() != 3)) {
    throw DimensionError("bmm: expected [F,m,k] or [m,k] times [F,k,n], got " +
                         shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  const bool shared = av.rank() == 2;
  const std::size_t frames = bv.dim(0);
  const std::size_t m = shared ? av.dim(0) : av.dim(1);
  const std::size_t k = shared ? av.dim(1) : av.dim(2);
  const std::size_t bk = trans_b ? bv.dim(2) : bv.dim(1);
  const std::size_t n = trans_b ? bv.dim(1) : bv.dim(2);
  if (bk != k || (!shared && av.dim(0) != frames)) {
    throw DimensionError("bmm: inner dimensions disagree for " +
                         shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + (trans_b ? "^T" : ""));
  }
  if (shared && !trans_b) return bmm_shared(a, b, frames, m, k, n);
  Tensor out({frames, m, n});
  const std::size_t a_step = shared ? 0 : m * k;
  const std::size_t ldb = trans_b ? k : n;
  for (std::size_t f = 0; f < frames; ++f) {
    kernels::gemm(false, trans_b, m, n, k, av.raw() + f * a_step, k,
                  bv.raw() + f * k * n, ldb, out.raw() + f * m * n, n, false);
  }
  return tape.record(
      std::move(out), {a, b},
      [a, b, frames, m, n, k, a_step, trans_b, ldb](Tape& t,
                                                   std::span<const double> g,
                                                   const Tensor&) {
        const Tensor& x = t.value_of(a);
        const Tensor& y = t.value_of(b);
        if (t.requires_grad(a)) {
          double* ga = t.grad_buffer(a).data();
          for (std::size_t f = 0; f < frames; ++f) {
            // dA = dC op(B)^T
            kernels::gemm(false, !trans_b, m, k, n, g.data() + f * m * n, n,
                          y.raw() + f * k * n, ldb, ga + f * a_step, k, true);
          }
        }
        if (t.requires_grad(b)) {
          double* gb = t.grad_buffer(b).data();
          for (std::size_t f = 0; f < frames; ++f) {
            if (trans_b) {
              // B stored [n, k]: dB = dC^T A
              kernels::gemm(true, false, n, k, m, g.data() + f * m * n, n,
                            x.raw() + f * a_step, k, gb + f * n * k, k, true);
            } else {
              kernels::gemm(true, false, k, n, m, x.raw() + f * a_step, k,
                            g.data() + f * m * n, n, gb + f * k * n, n, true);
            }
          }
        }
      },
      "bmm");
}

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (double& v : out.data()) v *= factor;
  return a.tape().record(
      std::move(out), {a},
      [a, factor](Tape& t, std::span<const double> g, const Tensor&) {
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
      },
      "scale");
}

Var relu(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  // NaN passes through so that check_finite and loss checks still see it.
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 || x[i] != x[i] ? x[i] : 0.0;
  if (a.tape().track_kinks()) a.tape().note_kinks(x.data());
  return a.tape().record(
      std::move(out), {a},
      [a](Tape& t, std::span<const double> g, const Tensor&) {
        // Subgradient 0 at the kink: pass-through only where input was > 0.
        const Tensor& in = t.value_of(a);
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in[i] > 0.0) ga[i] += g[i];
        }
      },
      "relu");
}

Var sigmoid(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return a.tape().record(
      std::move(out), {a},
      [a](Tape& t, std::span<const double> g, const Tensor& y) {
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * y[i] * (1.0 - y[i]);
        }
      },
      "sigmoid");
}

Var square(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
  return a.tape().record(
      std::move(out), {a},
      [a](Tape& t, std::span<const double> g, const Tensor&) {
        const Tensor& in = t.value_of(a);
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * in[i] * g[i];
      },
      "square");
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(
      Tensor::scalar(s), {a},
      [a](Tape& t, std::span<const double> g, const Tensor&) {
        std::span<double> ga = t.grad_buffer(a);
        for (double& v : ga) v += g[0];
      },
      "sum");
}

Var mean(const Var& a) {
  const std::size_t n = a.size();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(
      Tensor::scalar(s / static_cast<double>(n)), {a},
      [a, n](Tape& t, std::span<const double> g, const Tensor&) {
        std::span<double> ga = t.grad_buffer(a);
        const double share = g[0] / static_cast<double>(n);
        for (double& v : ga) v += share;
      },
      "mean");
}

Var concat_lastdim(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_lastdim: no operands");
  Tape& tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  Shape lead(first.begin(), first.end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (&p.tape() != &tape || s.size() != first.size() ||
        !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw DimensionError("concat_lastdim: incompatible operand " +
                           shape_string(s) + " vs " + shape_string(first));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  const std::size_t rows = shape_size(lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    const std::size_t w = widths[p];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.raw() + r * w, w, out.raw() + r * total + offset);
    }
    offset += w;
  }
  return tape.record(
      std::move(out), parts,
      [parts, widths, rows, total](Tape& t, std::span<const double> g,
                                   const Tensor&) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          const std::size_t w = widths[p];
          if (t.requires_grad(parts[p])) {
            std::span<double> gp = t.grad_buffer(parts[p]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < w; ++c) {
                gp[r * w + c] += g[r * total + off + c];
              }
            }
          }
          off += w;
        }
      },
      "concat_lastdim");
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(
      std::move(out), {a},
      [a](Tape& t, std::span<const double> g, const Tensor&) {
        t.accumulate_grad(a, g);
      },
      "reshape");
}

Var index_select(const Var& a, std::vector<std::size_t> rows) {
  const Tensor& x = a.value();
  if (x.rank() < 1 || rows.empty()) {
    throw DimensionError("index_select: needs a ranked operand and indices");
  }
  const std::size_t count = x.dim(0);
  const std::size_t width = x.size() / count;
  for (std::size_t r : rows) {
    if (r >= count) {
      throw DimensionError("index_select: row " + std::to_string(r) +
                           " out of range for " + shape_string(x.shape()));
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = rows.size();
  Tensor out(out_shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.raw() + rows[i] * width, width, out.raw() + i * width);
  }
  return a.tape().record(
      std::move(out), {a},
      [a, rows = std::move(rows), width](Tape& t, std::span<const double> g,
                                         const Tensor&) {
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          kernels::axpy(width, 1.0, g.data() + i * width,
                        ga.data() + rows[i] * width);
        }
      },
      "index_select");
}

Var softmax_lastdim(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t w = x.shape().back();
  const std::size_t rows = x.size() / w;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.raw() + r * w;
    double* o = out.raw() + r * w;
    const double top = *std::max_element(in, in + w);
    double z = 0.0;
    for (std::size_t c = 0; c < w; ++c) z += (o[c] = std::exp(in[c] - top));
    for (std::size_t c = 0; c < w; ++c) o[c] /= z;
  }
  return a.tape().record(
      std::move(out), {a},
      [a, w, rows](Tape& t, std::span<const double> g, const Tensor& y) {
        std::span<double> ga = t.grad_buffer(a);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.raw() + r * w;
          const double* gr = g.data() + r * w;
          double inner = 0.0;
          for (std::size_t c = 0; c < w; ++c) inner += gr[c] * yr[c];
          for (std::size_t c = 0; c < w; ++c) {
            ga[r * w + c] += yr[c] * (gr[c] - inner);
          }
        }
      },
      "softmax_lastdim");
}

Var pair_sum(const Var& s, const Var& r,
             std::shared_ptr<const NeighborTable> table) {
  Tape& tape = common_tape(s, r);
  const NeighborTable& nt = *table;
  check_table(nt, s.size(), "pair_sum");
  check_table(nt, r.size(), "pair_sum");
  const std::size_t n = nt.joints, k = nt.width;
  Tensor out({nt.frames, n, k});
  const Tensor& sv = s.value();
  const Tensor& rv = r.value();
  for (std::size_t f = 0; f < nt.frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nt.row(f, i);
      for (std::size_t c = 0; c < k; ++c) {
        if (row[c] == NeighborTable::kEmpty) continue;
        out[(f * n + i) * k + c] = sv[f * n + i] + rv[f * n + row[c]];
      }
    }
  }
  return tape.record(
      std::move(out), {s, r},
      [s, r, table](Tape& t, std::span<const double> g, const Tensor&) {
        const NeighborTable& tb = *table;
        const std::size_t n = tb.joints, k = tb.width;
        const bool need_s = t.requires_grad(s), need_r = t.requires_grad(r);
        std::span<double> gs, gr;
        if (need_s) gs = t.grad_buffer(s);
        if (need_r) gr = t.grad_buffer(r);
        for (std::size_t f = 0; f < tb.frames; ++f) {
          for (std::size_t i = 0; i < n; ++i) {
            auto row = tb.row(f, i);
            for (std::size_t c = 0; c < k; ++c) {
              if (row[c] == NeighborTable::kEmpty) continue;
              const double gv = g[(f * n + i) * k + c];
              if (need_s) gs[f * n + i] += gv;
              if (need_r) gr[f * n + row[c]] += gv;
            }
          }
        }
      },
      "pair_sum");
}

Var pair_dot(const Var& q, const Var& p,
             std::shared_ptr<const NeighborTable> table) {
  Tape& tape = common_tape(q, p);
  const NeighborTable& nt = *table;
  const Tensor& qv = q.value();
  const Tensor& pv = p.value();
  if (qv.shape() != pv.shape() || qv.rank() != 3) {
    throw DimensionError("pair_dot: operands must share an [F,N,C] shape, got " +
                         shape_string(qv.shape()) + " and " +
                         shape_string(pv.shape()));
  }
  check_table(nt, qv.dim(0) * qv.dim(1), "pair_dot");
  const std::size_t n = nt.joints, k = nt.width, ch = qv.dim(2);
  Tensor out({nt.frames, n, k});
  for (std::size_t f = 0; f < nt.frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nt.row(f, i);
      for (std::size_t c = 0; c < k; ++c) {
        if (row[c] == NeighborTable::kEmpty) continue;
        out[(f * n + i) * k + c] =
            kernels::dot(qv.raw() + (f * n + i) * ch,
                         pv.raw() + (f * n + row[c]) * ch, ch);
      }
    }
  }
  return tape.record(
      std::move(out), {q, p},
      [q, p, table, ch](Tape& t, std::span<const double> g, const Tensor&) {
        const NeighborTable& tb = *table;
        const std::size_t n = tb.joints, k = tb.width;
        const Tensor& qx = t.value_of(q);
        const Tensor& px = t.value_of(p);
        const bool need_q = t.requires_grad(q), need_p = t.requires_grad(p);
        double* gq = need_q ? t.grad_buffer(q).data() : nullptr;
        double* gp = need_p ? t.grad_buffer(p).data() : nullptr;
        for (std::size_t f = 0; f < tb.frames; ++f) {
          for (std::size_t i = 0; i < n; ++i) {
            auto row = tb.row(f, i);
            for (std::size_t c = 0; c < k; ++c) {
              if (row[c] == NeighborTable::kEmpty) continue;
              const double gv = g[(f * n + i) * k + c];
              const std::size_t qi = (f * n + i) * ch;
              const std::size_t pj = (f * n + row[c]) * ch;
              if (need_q) kernels::axpy(ch, gv, px.raw() + pj, gq + qi);
              if (need_p) kernels::axpy(ch, gv, qx.raw() + qi, gp + pj);
            }
          }
        }
      },
      "pair_dot");
}

Var pair_softmax(const Var& scores, std::shared_ptr<const NeighborTable> table) {
  const NeighborTable& nt = *table;
  const Tensor& x = scores.value();
  if (x.rank() != 3 || x.dim(0) != nt.frames || x.dim(1) != nt.joints ||
      x.dim(2) != nt.width) {
    throw DimensionError("pair_softmax: scores " + shape_string(x.shape()) +
                         " do not match the neighbor table");
  }
  const std::size_t k = nt.width;
  Tensor out(x.shape());
  for (std::size_t row = 0; row < nt.frames * nt.joints; ++row) {
    const std::int32_t* idx = nt.index.data() + row * k;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (idx[c] != NeighborTable::kEmpty) top = std::max(top, x[row * k + c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (idx[c] == NeighborTable::kEmpty) continue;
      z += (out[row * k + c] = std::exp(x[row * k + c] - top));
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (idx[c] != NeighborTable::kEmpty) out[row * k + c] /= z;
    }
  }
  return scores.tape().record(
      std::move(out), {scores},
      [scores, table](Tape& t, std::span<const double> g, const Tensor& y) {
        const NeighborTable& tb = *table;
        const std::size_t k = tb.width;
        std::span<double> gs = t.grad_buffer(scores);
        for (std::size_t row = 0; row < tb.frames * tb.joints; ++row) {
          const std::int32_t* idx = tb.index.data() + row * k;
          double inner = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            if (idx[c] != NeighborTable::kEmpty) inner += g[row * k + c] * y[row * k + c];
          }
          for (std::size_t c = 0; c < k; ++c) {
            if (idx[c] == NeighborTable::kEmpty) continue;
            gs[row * k + c] += y[row * k + c] * (g[row * k + c] - inner);
          }
        }
      },
      "pair_softmax");
}

Var scatter_pairs(const Var& values, std::shared_ptr<const NeighborTable> table) {
  const NeighborTable& nt = *table;
  const Tensor& v = values.value();
  if (v.rank() != 3 || v.dim(0) != nt.frames || v.dim(1) != nt.joints ||
      v.dim(2) != nt.width) {
    throw DimensionError("scatter_pairs: values " + shape_string(v.shape()) +
                         " do not match the neighbor table");
  }
  const std::size_t n = nt.joints, k = nt.width;
  Tensor out({nt.frames, n, n});
  for (std::size_t f = 0; f < nt.frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nt.row(f, i);
      for (std::size_t c = 0; c < k; ++c) {
        if (row[c] == NeighborTable::kEmpty) continue;
        out[(f * n + i) * n + row[c]] += v[(f * n + i) * k + c];
      }
    }
  }
  return values.tape().record(
      std::move(out), {values},
      [values, table](Tape& t, std::span<const double> g, const Tensor&) {
        const NeighborTable& tb = *table;
        const std::size_t n = tb.joints, k = tb.width;
        std::span<double> gv = t.grad_buffer(values);
        for (std::size_t f = 0; f < tb.frames; ++f) {
          for (std::size_t i = 0; i < n; ++i) {
            auto row = tb.row(f, i);
            for (std::size_t c = 0; c < k; ++c) {
              if (row[c] == NeighborTable::kEmpty) continue;
              gv[(f * n + i) * k + c] += g[(f * n + i) * n + row[c]];
            }
          }
        }
      },
      "scatter_pairs");
}

Var pair_aggregate(const Var& weights, const Var& x,
                   std::shared_ptr<const NeighborTable> table) {
  Tape& tape = common_tape(weights, x);
  const NeighborTable& nt = *table;
  const Tensor& w = weights.value();
  const Tensor& xv = x.value();
  if (w.rank() != 3 || w.dim(0) != nt.frames || w.dim(1) != nt.joints ||
      w.dim(2) != nt.width) {
    throw DimensionError("pair_aggregate: weights " + shape_string(w.shape()) +
                         " do not match the neighbor table");
  }
  if (xv.rank() != 3 || xv.dim(0) != nt.frames || xv.dim(1) != nt.joints) {
    throw DimensionError("pair_aggregate: features " + shape_string(xv.shape()) +
                         " do not match the neighbor table");
  }
  const std::size_t n = nt.joints, k = nt.width, ch = xv.dim(2);
  Tensor out({nt.frames, n, ch});
  for (std::size_t f = 0; f < nt.frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nt.row(f, i);
      double* o = out.raw() + (f * n + i) * ch;
      for (std::size_t c = 0; c < k; ++c) {
        if (row[c] == NeighborTable::kEmpty) continue;
        kernels::axpy(ch, w[(f * n + i) * k + c], xv.raw() + (f * n + row[c]) * ch, o);
      }
    }
  }
  return tape.record(
      std::move(out), {weights, x},
      [weights, x, table, ch](Tape& t, std::span<const double> g, const Tensor&) {
        const NeighborTable& tb = *table;
        const std::size_t n = tb.joints, k = tb.width;
        const Tensor& wv = t.value_of(weights);
        const Tensor& xx = t.value_of(x);
        const bool need_w = t.requires_grad(weights), need_x = t.requires_grad(x);
        double* gw = need_w ? t.grad_buffer(weights).data() : nullptr;
        double* gx = need_x ? t.grad_buffer(x).data() : nullptr;
        for (std::size_t f = 0; f < tb.frames; ++f) {
          for (std::size_t i = 0; i < n; ++i) {
            auto row = tb.row(f, i);
            const double* go = g.data() + (f * n + i) * ch;
            for (std::size_t c = 0; c < k; ++c) {
              if (row[c] == NeighborTable::kEmpty) continue;
              const std::size_t wi = (f * n + i) * k + c;
              const std::size_t xj = (f * n + row[c]) * ch;
              if (need_w) gw[wi] += kernels::dot(go, xx.raw() + xj, ch);
              if (need_x) kernels::axpy(ch, wv[wi], go, gx + xj);
            }
          }
        }
      },
      "pair_aggregate");
}

}  // namespace dgnet
