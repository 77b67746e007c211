// tests/test_numerics.cpp

// Copyright 2026  The Sluformer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Tensor invariants and the differentiation engine, checked against
// independent oracles: direct formulas recomputed in the test, hand
// derivatives, and central finite differences.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "slu/graph.hpp"
#include "slu/rng.hpp"
#include "slu/tensor.hpp"

using namespace slu;

namespace {

Tensor RandomTensor(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  t.FillUniform(rng, lo, hi);
  return t;
}

}  // namespace

// ---- Tensor type -------------------------------------------------------------

TEST_CASE("tensor shape product matches data length") {
  Tensor t({2, 3, 4});
  CHECK(t.Numel() == 24);
  CHECK_THROWS_AS(Tensor::From({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("tensor finiteness detection is an error state, never silent") {
  Tensor t({2, 2});
  CHECK(t.AllFinite());
  t.At(3) = std::nan("");
  CHECK_FALSE(t.AllFinite());
  CHECK_THROWS_AS(t.CheckFinite("unit"), NumericError);
  t.At(3) = INFINITY;
  CHECK_THROWS_AS(t.CheckFinite("unit"), NumericError);
}

TEST_CASE("shape errors name both shapes") {
  Tape tape;
  Tensor a({2, 3});
  Tensor b({2, 3});
  Var va = tape.Constant(a);
  Var vb = tape.Constant(b);
  try {
    tape.MatmulNN(va, vb);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

// ---- softmax -------------------------------------------------------------------

TEST_CASE("softmax: symmetry case [0,0]") {
  Tensor x = Tensor::FromRows({{0.0, 0.0}});
  Tensor y = SoftmaxRowsEval(x);
  CHECK(y.At(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.At(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax: direct formula oracle on [1,2,3]") {
  Tensor x = Tensor::FromRows({{1.0, 2.0, 3.0}});
  Tensor y = SoftmaxRowsEval(x);
  // independent oracle: exp(x_i) / sum exp(x_j) without max subtraction
  double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  double z = e1 + e2 + e3;
  CHECK(std::abs(y.At(0, 0) - e1 / z) < 1e-15);
  CHECK(std::abs(y.At(0, 1) - e2 / z) < 1e-15);
  CHECK(std::abs(y.At(0, 2) - e3 / z) < 1e-15);
}

TEST_CASE("softmax: stability at extreme offsets") {
  Tensor x = Tensor::FromRows({{700.0, 1700.0}});
  Tensor y = SoftmaxRowsEval(x);
  CHECK(y.AllFinite());
  CHECK(y.At(0, 0) == doctest::Approx(0.0).epsilon(1e-300));
  CHECK(y.At(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax: rows sum to one and shifting is invariant") {
  Rng rng(42);
  for (int round = 0; round < 50; ++round) {
    int64_t cols = 1 + static_cast<int64_t>(rng.Below(6));
    Tensor x = RandomTensor(rng, {3, cols}, -5.0, 5.0);
    Tensor y = SoftmaxRowsEval(x);
    for (int64_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (int64_t j = 0; j < cols; ++j) {
        sum += y.At(i, j);
        CHECK(y.At(i, j) >= 0.0);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    double shift = rng.Uniform(-100.0, 100.0);
    Tensor xs = x;
    for (int64_t i = 0; i < xs.Numel(); ++i) xs.At(i) += shift;
    Tensor ys = SoftmaxRowsEval(xs);
    for (int64_t i = 0; i < y.Numel(); ++i) {
      CHECK(std::abs(y.At(i) - ys.At(i)) < 1e-9);
    }
  }
}

TEST_CASE("softmax: empty axis is an error") {
  Tape tape;
  Tensor x({2, 0});
  CHECK_THROWS_AS(tape.SoftmaxRows(tape.Constant(x)), ShapeError);
}

// ---- layer norm -----------------------------------------------------------------

TEST_CASE("layer_norm: two-point normalization") {
  Tensor x = Tensor::FromRows({{1.0, 3.0}});
  Tensor gain = Tensor::Full({2}, 1.0);
  Tensor bias = Tensor::Zeros({2});
  Tensor y = LayerNormEval(x, gain, bias, 1e-12);
  CHECK(y.At(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y.At(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm: constant vector collapses to the bias exactly") {
  Tensor x = Tensor::FromRows({{3.7, 3.7, 3.7, 3.7}});
  Tensor gain = Tensor::Full({4}, 2.5);
  Tensor bias = Tensor::From({4}, {0.1, -0.2, 0.3, -0.4});
  Tensor y = LayerNormEval(x, gain, bias, 1e-6);
  for (int64_t j = 0; j < 4; ++j) CHECK(y.At(0, j) == bias.At(j));
}

TEST_CASE("layer_norm: from-scratch oracle on a random 8-vector") {
  Rng rng(7);
  Tensor x = RandomTensor(rng, {1, 8}, -2.0, 2.0);
  Tensor gain = RandomTensor(rng, {8}, 0.5, 1.5);
  Tensor bias = RandomTensor(rng, {8}, -0.5, 0.5);
  const double eps = 1e-6;
  Tensor y = LayerNormEval(x, gain, bias, eps);
  // oracle: plain mean/variance recomputation
  double mean = 0;
  for (int64_t j = 0; j < 8; ++j) mean += x.At(0, j);
  mean /= 8.0;
  double var = 0;
  for (int64_t j = 0; j < 8; ++j) var += (x.At(0, j) - mean) * (x.At(0, j) - mean);
  var /= 8.0;
  for (int64_t j = 0; j < 8; ++j) {
    double expect = (x.At(0, j) - mean) / std::sqrt(var + eps) * gain.At(j) + bias.At(j);
    CHECK(std::abs(y.At(0, j) - expect) < 1e-12);
  }
}

TEST_CASE("layer_norm: unit gain output has zero mean and unit variance") {
  Rng rng(8);
  Tensor x = RandomTensor(rng, {4, 16}, -3.0, 3.0);
  // ensure var >= 1 per row by spreading values
  for (int64_t i = 0; i < 4; ++i) x.At(i, 0) += 5.0;
  Tensor gain = Tensor::Full({16}, 1.0);
  Tensor bias = Tensor::Zeros({16});
  Tensor y = LayerNormEval(x, gain, bias, 1e-6);
  for (int64_t i = 0; i < 4; ++i) {
    double mean = 0;
    for (int64_t j = 0; j < 16; ++j) mean += y.At(i, j);
    mean /= 16.0;
    CHECK(std::abs(mean) < 1e-10);
    double var = 0;
    for (int64_t j = 0; j < 16; ++j) var += y.At(i, j) * y.At(i, j);
    var /= 16.0;
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("layer_norm: d < 2 is an error") {
  Tape tape;
  Tensor x({3, 1});
  Tensor g({1}), b({1});
  CHECK_THROWS_AS(
      tape.LayerNormRows(tape.Constant(x), tape.Constant(g), tape.Constant(b), 1e-6),
      ShapeError);
}

// ---- backward ------------------------------------------------------------------

TEST_CASE("backward: loss = sum(W) gives all-ones gradient") {
  Tensor w = Tensor::FromRows({{0.3, -1.2}, {2.0, 0.0}});
  Tape tape;
  Var vw = tape.Param(w);
  Var loss = tape.Sum(vw);
  tape.Backward(loss);
  Tensor g = tape.Grad(vw);
  for (int64_t i = 0; i < 4; ++i) CHECK(g.At(i) == 1.0);
}

TEST_CASE("backward: (W.x - t)^2 matches the hand derivative") {
  // loss = sum_i (Wx - t)_i^2, dL/dW = 2 (Wx - t) x^T
  Rng rng(11);
  Tensor w = RandomTensor(rng, {3, 2});
  Tensor x = RandomTensor(rng, {2, 1});
  Tensor t = RandomTensor(rng, {3, 1});
  Tape tape;
  Var vw = tape.Param(w);
  Var vx = tape.Constant(x);
  Var vt = tape.Constant(t);
  Var diff = tape.Add(tape.MatmulNN(vw, vx), tape.Scale(vt, -1.0));
  Var loss = tape.SumSquares(diff);
  tape.Backward(loss);
  Tensor g = tape.Grad(vw);

  Tensor wx = MatmulEval(w, x);
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 2; ++j) {
      double expect = 2.0 * (wx.At(i, 0) - t.At(i, 0)) * x.At(j, 0);
      CHECK(std::abs(g.At(i, j) - expect) < 1e-12);
    }
  }
}

TEST_CASE("backward: parameter off the loss path gets zero gradient") {
  Tensor w = Tensor::FromRows({{1.0, 2.0}});
  Tensor unused = Tensor::FromRows({{5.0}});
  Tape tape;
  Var vw = tape.Param(w);
  Var vu = tape.Param(unused);
  Var loss = tape.Sum(vw);
  tape.Backward(loss);
  Tensor g = tape.Grad(vu);
  CHECK(g.Numel() == 1);
  CHECK(g.At(0) == 0.0);
}

TEST_CASE("backward: non-scalar loss is an error") {
  Tensor w = Tensor::FromRows({{1.0, 2.0}});
  Tape tape;
  Var vw = tape.Param(w);
  CHECK_THROWS_AS(tape.Backward(vw), UsageError);
}

// ---- finite-difference oracle over every primitive --------------------------------

namespace {

// Builds loss = sum_squares(f(params...)) and checks every param against
// central differences.
void CheckOp(const std::function<Var(Tape&, std::vector<Var>&)>& build,
             std::vector<Tensor>& params, double tol = 1e-6) {
  auto loss_value = [&]() {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (Tensor& p : params) vars.push_back(tape.Param(p));
    Var out = build(tape, vars);
    return tape.Value(tape.SumSquares(out)).At(0);
  };

  // analytic gradients
  Tape tape;
  std::vector<Var> vars;
  for (Tensor& p : params) vars.push_back(tape.Param(p));
  Var out = build(tape, vars);
  tape.Backward(tape.SumSquares(out));
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Var v : vars) analytic.push_back(tape.Grad(v));

  std::vector<GradCheckItem> items;
  for (size_t i = 0; i < params.size(); ++i) {
    items.push_back({Msg("p", i), &params[i], &analytic[i]});
  }
  GradCheckReport report = GradCheck(items, loss_value);
  CHECK_MESSAGE(report.Pass(tol), report.Summary());
}

}  // namespace

TEST_CASE("grad oracle: every primitive against central differences") {
  Rng rng(21);

  SUBCASE("matmul_nn") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 4}), RandomTensor(rng, {4, 2})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.MatmulNN(v[0], v[1]); }, p);
  }
  SUBCASE("matmul_nt") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 4}), RandomTensor(rng, {2, 4})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.MatmulNT(v[0], v[1]); }, p);
  }
  SUBCASE("add and scale") {
    std::vector<Tensor> p{RandomTensor(rng, {2, 3}), RandomTensor(rng, {2, 3})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.Scale(t.Add(v[0], v[1]), -1.7); }, p);
  }
  SUBCASE("add_row") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 4}), RandomTensor(rng, {4})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.AddRow(v[0], v[1]); }, p);
  }
  SUBCASE("relu") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 5}, -1.0, 1.0)};
    // keep values away from the kink
    for (int64_t i = 0; i < p[0].Numel(); ++i) {
      if (std::abs(p[0].At(i)) < 0.05) p[0].At(i) = 0.1;
    }
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.Relu(v[0]); }, p);
  }
  SUBCASE("softmax") {
    std::vector<Tensor> p{RandomTensor(rng, {2, 5}, -2.0, 2.0)};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.SoftmaxRows(v[0]); }, p);
  }
  SUBCASE("layer_norm") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 6}, -2.0, 2.0),
                          RandomTensor(rng, {6}, 0.5, 1.5),
                          RandomTensor(rng, {6}, -0.5, 0.5)};
    CheckOp([](Tape& t, std::vector<Var>& v) {
      return t.LayerNormRows(v[0], v[1], v[2], 1e-6);
    }, p);
  }
  SUBCASE("lookup_rows") {
    std::vector<Tensor> p{RandomTensor(rng, {5, 3})};
    CheckOp([](Tape& t, std::vector<Var>& v) {
      return t.LookupRows(v[0], {1, 4, 1});
    }, p);
  }
  SUBCASE("concat_cols") {
    std::vector<Tensor> p{RandomTensor(rng, {2, 3}), RandomTensor(rng, {2, 2})};
    CheckOp([](Tape& t, std::vector<Var>& v) {
      std::vector<Var> parts{v[0], v[1]};
      return t.ConcatCols(parts);
    }, p);
  }
  SUBCASE("slice_rows") {
    std::vector<Tensor> p{RandomTensor(rng, {5, 3})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.SliceRows(v[0], 1, 4); }, p);
  }
  SUBCASE("mean_rows") {
    std::vector<Tensor> p{RandomTensor(rng, {4, 3})};
    CheckOp([](Tape& t, std::vector<Var>& v) { return t.MeanRows(v[0]); }, p);
  }
  SUBCASE("mask add and mul") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 3})};
    Tensor additive = Tensor::Zeros({3, 3});
    additive.At(0, 2) = -1e30;
    Tensor mask = Tensor::Full({3, 3}, 1.0);
    mask.At(0, 2) = 0.0;
    CheckOp([additive, mask](Tape& t, std::vector<Var>& v) {
      return t.MulConst(t.SoftmaxRows(t.AddConst(v[0], additive)), mask);
    }, p);
  }
  SUBCASE("smoothed cross entropy") {
    std::vector<Tensor> p{RandomTensor(rng, {3, 4}, -1.0, 1.0)};
    auto loss_value = [&]() {
      Tape tape;
      Var logits = tape.Param(p[0]);
      return tape.Value(tape.SmoothedCrossEntropy(logits, {1, 3, 0}, 0.1)).At(0);
    };
    Tape tape;
    Var logits = tape.Param(p[0]);
    tape.Backward(tape.SmoothedCrossEntropy(logits, {1, 3, 0}, 0.1));
    Tensor analytic = tape.Grad(logits);
    std::vector<GradCheckItem> items{{"logits", &p[0], &analytic}};
    GradCheckReport report = GradCheck(items, loss_value);
    CHECK_MESSAGE(report.Pass(1e-6), report.Summary());
  }
}

TEST_CASE("grad_check: single linear layer + squared error below 1e-6") {
  Rng rng(31);
  Tensor w = RandomTensor(rng, {4, 3});
  Tensor b = RandomTensor(rng, {4});
  Tensor x = RandomTensor(rng, {5, 3});
  Tensor target = RandomTensor(rng, {5, 4});

  auto loss_value = [&]() {
    Tape tape;
    Var vw = tape.Param(w);
    Var vb = tape.Param(b);
    Var pred = tape.AddRow(tape.MatmulNT(tape.Constant(x), vw), vb);
    Var diff = tape.Add(pred, tape.Scale(tape.Constant(target), -1.0));
    return tape.Value(tape.SumSquares(diff)).At(0);
  };

  Tape tape;
  Var vw = tape.Param(w);
  Var vb = tape.Param(b);
  Var pred = tape.AddRow(tape.MatmulNT(tape.Constant(x), vw), vb);
  Var diff = tape.Add(pred, tape.Scale(tape.Constant(target), -1.0));
  tape.Backward(tape.SumSquares(diff));
  Tensor gw = tape.Grad(vw);
  Tensor gb = tape.Grad(vb);

  std::vector<GradCheckItem> items{{"w", &w, &gw}, {"b", &b, &gb}};
  GradCheckReport report = GradCheck(items, loss_value);
  CHECK_MESSAGE(report.max_rel_err < 1e-6, report.Summary());
}

TEST_CASE("grad_check: frozen tensors are simply not reported") {
  Rng rng(32);
  Tensor w = RandomTensor(rng, {2, 2});
  Tensor frozen = RandomTensor(rng, {2, 2});

  auto loss_value = [&]() {
    Tape tape;
    Var vw = tape.Param(w);
    Var vf = tape.Constant(frozen);
    return tape.Value(tape.SumSquares(tape.Add(vw, vf))).At(0);
  };

  Tape tape;
  Var vw = tape.Param(w);
  Var vf = tape.Constant(frozen);
  tape.Backward(tape.SumSquares(tape.Add(vw, vf)));
  Tensor gw = tape.Grad(vw);
  std::vector<GradCheckItem> items{{"w", &w, &gw}};
  GradCheckReport report = GradCheck(items, loss_value);
  CHECK(report.tensors.size() == 1);
  CHECK(report.tensors[0].name == "w");
  CHECK(report.Pass(1e-6));
}

TEST_CASE("purity: identical graphs produce bit-identical values") {
  Rng rng1(55), rng2(55);
  Tensor a1 = RandomTensor(rng1, {4, 4});
  Tensor a2 = RandomTensor(rng2, {4, 4});
  Tape t1, t2;
  Var o1 = t1.SoftmaxRows(t1.MatmulNN(t1.Constant(a1), t1.Constant(a1)));
  Var o2 = t2.SoftmaxRows(t2.MatmulNN(t2.Constant(a2), t2.Constant(a2)));
  const Tensor& v1 = t1.Value(o1);
  const Tensor& v2 = t2.Value(o2);
  CHECK(std::memcmp(v1.Data(), v2.Data(),
                    static_cast<size_t>(v1.Numel()) * sizeof(double)) == 0);
}

TEST_CASE("dropout: inverted scaling keeps the expectation, eval identity is implicit") {
  Rng rng(66);
  Tensor x = Tensor::Full({100, 10}, 1.0);
  Tape tape;
  Var vx = tape.Constant(x);
  Var vd = tape.Dropout(vx, 0.1, rng);
  const Tensor& y = tape.Value(vd);
  double sum = 0;
  int64_t zeros = 0;
  for (int64_t i = 0; i < y.Numel(); ++i) {
    sum += y.At(i);
    if (y.At(i) == 0.0) ++zeros;
  }
  CHECK(zeros > 0);
  CHECK(sum / static_cast<double>(y.Numel()) == doctest::Approx(1.0).epsilon(0.05));
  // rate 0 returns the same var
  Var same = tape.Dropout(vx, 0.0, rng);
  CHECK(same.id == vx.id);
}
