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


#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "dgnet/autodiff.hpp"
#include "dgnet/error.hpp"
#include "dgnet/rng.hpp"
#include "oracles.hpp"

namespace dgnet {
namespace {

using Build = std::function<Var(Tape&, const std::vector<Var>&)>;

// Largest relative error between analytic gradients of sum(op(x) * R) and
// central finite differences, over every coordinate of every input.
double op_gradient_error(const Build& build, std::vector<Tensor> inputs, std::uint64_t seed) {
  Rng rng(seed);
  Tensor r;
  {
    Tape tape;
    std::vector<Var> vs;
    for (const Tensor& t : inputs) vs.push_back(tape.constant(t));
    r = oracle::random_tensor(build(tape, vs).shape(), rng, -1.0, 1.0);
  }
  auto value = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vs;
    for (const Tensor& t : xs) vs.push_back(tape.constant(t));
    const Tensor& out = build(tape, vs).value();
    long double s = 0.0L;
    for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<long double>(out[i]) * r[i];
    return static_cast<double>(s);
  };
  std::vector<std::vector<double>> grads(inputs.size());
  {
    Tape tape;
    std::vector<Var> vs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      grads[i].assign(inputs[i].size(), 0.0);
      vs.push_back(tape.leaf(inputs[i], grads[i]));
    }
    tape.backward(sum(mul(build(tape, vs), tape.constant(r))));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto numeric = oracle::fd_gradient(
        [&](const Tensor& xi) {
          std::vector<Tensor> xs = inputs;
          xs[i] = xi;
          return value(xs);
        },
        inputs[i]);
    worst = std::max(worst, oracle::max_rel_error(grads[i], numeric));
  }
  return worst;
}

Tensor rnd(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  return oracle::random_tensor(std::move(s), rng);
}

std::shared_ptr<const NeighborTable> random_table(std::size_t f, std::size_t n, std::size_t k,
                                                  std::uint64_t seed, bool with_empty) {
  Rng rng(seed);
  NeighborTable t(f, n, k);
  for (std::size_t fr = 0; fr < f; ++fr) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = t.row(fr, i);
      for (std::size_t c = 0; c < k; ++c) {
        // Distinct columns per row.
        std::int32_t j;
        bool dup;
        do {
          j = static_cast<std::int32_t>(rng.below(n));
          dup = false;
          for (std::size_t p = 0; p < c; ++p) dup |= row[p] == j;
        } while (dup);
        row[c] = j;
      }
      if (with_empty && k > 1 && i % 3 == 0) row[k - 1] = NeighborTable::kEmpty;
    }
  }
  return std::make_shared<const NeighborTable>(std::move(t));
}

constexpr double kTol = 1e-4;

TEST(AutodiffExamples, MatmulIdentityAndSelector) {
  Tape tape;
  const Var i2 = tape.constant(Tensor::identity(2));
  const Var m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(i2, m).value(), Tensor::matrix({{1, 2}, {3, 4}}));
  const Var sel = tape.constant(Tensor::matrix({{1, 0}, {0, 0}}));
  const Var b = tape.constant(Tensor::matrix({{5, 6}, {7, 8}}));
  EXPECT_EQ(matmul(sel, b).value(), Tensor::matrix({{5, 6}, {0, 0}}));
}

TEST(AutodiffExamples, MatmulGradientMatchesFiniteDifferences) {
  const Tensor a = Tensor::matrix({{1, 1}, {1, 1}});
  const Tensor b = Tensor::matrix({{1, 2}, {3, 4}});
  std::vector<double> ga(4);
  Tape tape;
  tape.backward(sum(matmul(tape.leaf(a, ga), tape.constant(b))));
  const auto numeric = oracle::fd_gradient(
      [&](const Tensor& x) {
        const Tensor c = oracle::matmul(x, b);
        double s = 0;
        for (double v : c.data()) s += v;
        return s;
      },
      a);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ga[i], numeric[i], 1e-8);
}

TEST(AutodiffExamples, Elementwise) {
  Tape tape;
  EXPECT_EQ(relu(tape.constant(Tensor::vector({-1, 0, 2}))).value(), Tensor::vector({0, 0, 2}));
  EXPECT_EQ(mul(tape.constant(Tensor::vector({1, 2, 3})), tape.constant(Tensor::vector({0, 1, 2})))
                .value(),
            Tensor::vector({0, 2, 6}));
  const Tensor zero = Tensor::vector({0.0});
  std::vector<double> g(1);
  Tape t2;
  t2.backward(sum(sigmoid(t2.leaf(zero, g))));
  EXPECT_DOUBLE_EQ(g[0], 0.25);
}

TEST(AutodiffExamples, BackwardOfSums) {
  // Leaves reference their tensor, so inputs are named to outlive the tape.
  const Tensor a = Tensor::vector({4, 5, 6}), b = Tensor::vector({1, 2, 3});
  std::vector<double> g(3);
  Tape tape;
  tape.backward(sum(tape.leaf(a, g)));
  EXPECT_EQ(g, (std::vector<double>{1, 1, 1}));
  std::vector<double> g2(3);
  Tape t2;
  const Var x = t2.leaf(b, g2);
  t2.backward(sum(mul(x, x)));
  EXPECT_EQ(g2, (std::vector<double>{2, 4, 6}));
}

TEST(AutodiffExamples, ReluSubgradientAtZeroIsZero) {
  const Tensor x = Tensor::vector({-1, 0, 0, 3});
  std::vector<double> g(4);
  Tape tape;
  tape.backward(sum(relu(tape.leaf(x, g))));
  EXPECT_EQ(g, (std::vector<double>{0, 0, 0, 1}));
}

TEST(AutodiffProperties, IdentityMatmulIsExact) {
  const Tensor x = rnd({4, 5}, 3);
  Tape tape;
  EXPECT_EQ(matmul(tape.constant(Tensor::identity(4)), tape.constant(x)).value(), x);
  EXPECT_EQ(matmul(tape.constant(x), tape.constant(Tensor::identity(5))).value(), x);
}

TEST(AutodiffProperties, ReluBackwardZeroWhereOutputZero) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = oracle::random_tensor({32}, rng);
    x[0] = 0.0;
    std::vector<double> g(32);
    Tape tape;
    const Var y = relu(tape.leaf(x, g));
    tape.backward(sum(mul(y, tape.constant(oracle::random_tensor({32}, rng, 0.5, 1.5)))));
    for (std::size_t i = 0; i < 32; ++i) {
      if (y.value()[i] == 0.0) EXPECT_EQ(g[i], 0.0);
    }
  }
}

TEST(AutodiffProperties, IndependentSubgraphsBackwardSeparately) {
  const Tensor a = rnd({3, 4}, 5), b = rnd({4, 2}, 6), c = rnd({5}, 7);
  std::vector<double> ga(12), gb(8), gc(5);
  {
    Tape tape;
    const Var va = tape.leaf(a, ga), vb = tape.leaf(b, gb), vc = tape.leaf(c, gc);
    tape.backward(add(sum(square(matmul(va, vb))), sum(sigmoid(vc))));
  }
  std::vector<double> ga1(12), gb1(8), gc1(5);
  {
    Tape tape;
    tape.backward(sum(square(matmul(tape.leaf(a, ga1), tape.leaf(b, gb1)))));
  }
  {
    Tape tape;
    tape.backward(sum(sigmoid(tape.leaf(c, gc1))));
  }
  EXPECT_EQ(ga, ga1);
  EXPECT_EQ(gb, gb1);
  EXPECT_EQ(gc, gc1);
}

TEST(AutodiffGradients, DenseOps) {
  std::uint64_t seed = 100;
  auto check = [&](const char* name, const Build& b, std::vector<Tensor> in) {
    EXPECT_LT(op_gradient_error(b, std::move(in), ++seed), kTol) << name;
  };
  check("matmul", [](Tape&, const auto& v) { return matmul(v[0], v[1]); },
        {rnd({3, 4}, 1), rnd({4, 5}, 2)});
  check("matmul rank3", [](Tape&, const auto& v) { return matmul(v[0], v[1]); },
        {rnd({2, 3, 4}, 3), rnd({4, 2}, 4)});
  check("linear", [](Tape&, const auto& v) { return linear({v[0], v[1]}, {v[2], v[3]}, v[4]); },
        {rnd({2, 3, 4}, 5), rnd({2, 3, 2}, 6), rnd({4, 5}, 7), rnd({2, 5}, 8), rnd({5}, 9)});
  check("bmm", [](Tape&, const auto& v) { return bmm(v[0], v[1]); },
        {rnd({3, 4, 5}, 10), rnd({3, 5, 2}, 11)});
  check("bmm shared", [](Tape&, const auto& v) { return bmm(v[0], v[1]); },
        {rnd({4, 5}, 12), rnd({3, 5, 2}, 13)});
  check("bmm trans_b", [](Tape&, const auto& v) { return bmm(v[0], v[1], true); },
        {rnd({3, 4, 5}, 14), rnd({3, 2, 5}, 15)});
  check("add", [](Tape&, const auto& v) { return add(v[0], v[1]); },
        {rnd({3, 4}, 16), rnd({3, 4}, 17)});
  check("add trailing", [](Tape&, const auto& v) { return add(v[0], v[1]); },
        {rnd({2, 3, 4}, 18), rnd({4}, 19)});
  check("add scalar", [](Tape&, const auto& v) { return add(v[0], v[1]); },
        {rnd({2, 3}, 20), rnd({1}, 21)});
  check("sub", [](Tape&, const auto& v) { return sub(v[0], v[1]); },
        {rnd({2, 3}, 22), rnd({3}, 23)});
  check("mul", [](Tape&, const auto& v) { return mul(v[0], v[1]); },
        {rnd({2, 3}, 24), rnd({2, 3}, 25)});
  check("scale", [](Tape&, const auto& v) { return scale(v[0], -1.7); }, {rnd({5}, 26)});
  check("sigmoid", [](Tape&, const auto& v) { return sigmoid(v[0]); }, {rnd({6}, 27)});
  check("square", [](Tape&, const auto& v) { return square(v[0]); }, {rnd({6}, 28)});
  check("sum", [](Tape&, const auto& v) { return sum(v[0]); }, {rnd({2, 3}, 29)});
  check("mean", [](Tape&, const auto& v) { return mean(v[0]); }, {rnd({2, 3}, 30)});
  check("concat", [](Tape&, const auto& v) { return concat_lastdim({v[0], v[1]}); },
        {rnd({2, 3, 2}, 31), rnd({2, 3, 4}, 32)});
  check("reshape", [](Tape&, const auto& v) { return reshape(v[0], {3, 2}); }, {rnd({6}, 33)});
  check("index_select", [](Tape&, const auto& v) { return index_select(v[0], {2, 0, 2, 1}); },
        {rnd({3, 4}, 34)});
  check("softmax", [](Tape&, const auto& v) { return softmax_lastdim(v[0]); },
        {rnd({3, 5}, 35)});
}

TEST(AutodiffGradients, ReluAwayFromTheKink) {
  Tensor x = rnd({20}, 40);
  for (double& v : x.data()) {
    if (std::abs(v) < 0.1) v = 0.5;
  }
  EXPECT_LT(op_gradient_error([](Tape&, const auto& v) { return relu(v[0]); }, {x}, 41), kTol);
}

TEST(AutodiffGradients, PairOps) {
  const std::size_t f = 3, n = 6, k = 3, c = 4;
  const auto table = random_table(f, n, k, 9, true);
  EXPECT_LT(op_gradient_error([&](Tape&, const auto& v) { return pair_sum(v[0], v[1], table); },
                              {rnd({f, n}, 50), rnd({f, n}, 51)}, 52),
            kTol);
  EXPECT_LT(op_gradient_error([&](Tape&, const auto& v) { return pair_dot(v[0], v[1], table); },
                              {rnd({f, n, c}, 53), rnd({f, n, c}, 54)}, 55),
            kTol);
  EXPECT_LT(op_gradient_error([&](Tape&, const auto& v) { return pair_softmax(v[0], table); },
                              {rnd({f, n, k}, 56)}, 57),
            kTol);
  EXPECT_LT(op_gradient_error([&](Tape&, const auto& v) { return scatter_pairs(v[0], table); },
                              {rnd({f, n, k}, 58)}, 59),
            kTol);
  EXPECT_LT(
      op_gradient_error([&](Tape&, const auto& v) { return pair_aggregate(v[0], v[1], table); },
                        {rnd({f, n, k}, 60), rnd({f, n, c}, 61)}, 62),
      kTol);
}

TEST(AutodiffPairOps, AggregateEqualsDenseProduct) {
  const std::size_t f = 4, n = 7, k = 3, c = 5;
  const auto table = random_table(f, n, k, 70, true);
  const Tensor w = rnd({f, n, k}, 71), x = rnd({f, n, c}, 72);
  Tape tape;
  const Var vw = tape.constant(w), vx = tape.constant(x);
  const Tensor sparse = pair_aggregate(vw, vx, table).value();
  const Tensor dense = bmm(scatter_pairs(vw, table), vx).value();
  EXPECT_LT(max_abs_diff(sparse, dense), 1e-13);
}

TEST(AutodiffPairOps, SoftmaxRowsSumToOneOverOccupiedSlots) {
  const auto table = random_table(2, 5, 3, 80, true);
  Tape tape;
  const Tensor y = pair_softmax(tape.constant(rnd({2, 5, 3}, 81)), table).value();
  for (std::size_t row = 0; row < 10; ++row) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const bool empty = table->index[row * 3 + c] == NeighborTable::kEmpty;
      if (empty) EXPECT_EQ(y[row * 3 + c], 0.0);
      s += y[row * 3 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(AutodiffErrors, ShapeMismatchNamesBothShapes) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3})), b = tape.constant(Tensor({4, 5}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2x3]"), std::string::npos) << what;
    EXPECT_NE(what.find("[4x5]"), std::string::npos) << what;
  }
  EXPECT_THROW(add(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2}))), DimensionError);
  EXPECT_THROW(bmm(tape.constant(Tensor({2, 3, 4})), tape.constant(Tensor({3, 4, 2}))),
               DimensionError);
}

TEST(AutodiffErrors, BackwardMisuse) {
  const Tensor v = Tensor::vector({1, 2, 3});
  Tape tape;
  std::vector<double> g(3);
  const Var x = tape.leaf(v, g);
  EXPECT_THROW(tape.backward(x), TapeError);  // not a scalar
  const Var s = sum(x);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), TapeError);  // twice without reset
  Tape other;
  EXPECT_THROW(other.backward(s), TapeError);  // root from another tape
  tape.reset();
  EXPECT_THROW(tape.backward(s), TapeError);  // stale handle after reset
  EXPECT_THROW(Var().value(), TapeError);
}

TEST(AutodiffErrors, CheckFiniteNamesTheOperation) {
  Tape tape;
  tape.set_check_finite(true);
  Tape::Scope scope(tape, "block2/dtg");
  const Var big = tape.constant(Tensor::vector({1e300}));
  try {
    mul(big, big);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("mul"), std::string::npos) << what;
    EXPECT_NE(what.find("block2/dtg"), std::string::npos) << what;
  }
}

TEST(AutodiffTape, ParameterLeafAccumulatesIntoTensorGrad) {
  Tensor w = Tensor::vector({1, 2});
  w.set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    tape.backward(sum(square(tape.leaf(w))));
  }
  EXPECT_EQ(w.grad()[0], 4.0);
  EXPECT_EQ(w.grad()[1], 8.0);
  w.zero_grad();
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(AutodiffTape, KinkSignatureTracksReluPattern) {
  auto sig = [](double v) {
    Tape tape;
    tape.set_track_kinks(true);
    relu(tape.constant(Tensor::vector({v, 1.0})));
    return tape.kink_signature();
  };
  EXPECT_EQ(sig(0.5), sig(0.7));
  EXPECT_NE(sig(0.5), sig(-0.5));
}

}  // namespace
}  // namespace dgnet
