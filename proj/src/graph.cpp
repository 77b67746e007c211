// src/graph.cpp

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

#include "slu/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "slu/kernels.hpp"

namespace slu {

namespace {

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b)) {
    throw ShapeError(Msg(op, ": shapes differ ", a.ShapeStr(), " vs ", b.ShapeStr()));
  }
}

}  // namespace

Var Tape::Push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::Constant(const Tensor& value) {
  Node n;
  n.op = Op::kConstant;
  n.external = &value;
  n.needs_grad = false;
  return Push(std::move(n));
}

Var Tape::Param(const Tensor& value, Tensor* grad_sink) {
  if (grad_sink != nullptr && !grad_sink->SameShape(value)) {
    throw ShapeError(Msg("param: grad sink shape ", grad_sink->ShapeStr(),
                         " does not match value ", value.ShapeStr()));
  }
  Node n;
  n.op = Op::kParam;
  n.external = &value;
  n.sink = grad_sink;
  n.needs_grad = true;
  return Push(std::move(n));
}

Var Tape::MatmulNN(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  if (ta.Rank() != 2 || tb.Rank() != 2 || ta.Cols() != tb.Rows()) {
    throw ShapeError(Msg("matmul: incompatible shapes ", ta.ShapeStr(), " x ", tb.ShapeStr()));
  }
  Node n;
  n.op = Op::kMatmulNN;
  n.in = {a.id, b.id, -1};
  n.out = Tensor({ta.Rows(), tb.Cols()});
  kernels::MatmulNN(ta.Data(), tb.Data(), n.out.Data(),
                    static_cast<size_t>(ta.Rows()), static_cast<size_t>(ta.Cols()),
                    static_cast<size_t>(tb.Cols()));
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::MatmulNT(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  if (ta.Rank() != 2 || tb.Rank() != 2 || ta.Cols() != tb.Cols()) {
    throw ShapeError(Msg("matmul_nt: incompatible shapes ", ta.ShapeStr(), " x ",
                         tb.ShapeStr(), "^T"));
  }
  Node n;
  n.op = Op::kMatmulNT;
  n.in = {a.id, b.id, -1};
  n.out = Tensor({ta.Rows(), tb.Rows()});
  kernels::MatmulNT(ta.Data(), tb.Data(), n.out.Data(),
                    static_cast<size_t>(ta.Rows()), static_cast<size_t>(ta.Cols()),
                    static_cast<size_t>(tb.Rows()));
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::Add(Var a, Var b) {
  const Tensor& ta = Value(a);
  const Tensor& tb = Value(b);
  CheckSameShape(ta, tb, "add");
  Node n;
  n.op = Op::kAdd;
  n.in = {a.id, b.id, -1};
  n.out = Tensor(ta.Shape());
  const double* pa = ta.Data();
  const double* pb = tb.Data();
  double* po = n.out.Data();
  for (int64_t i = 0; i < ta.Numel(); ++i) po[i] = pa[i] + pb[i];
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::AddRow(Var a, Var row) {
  const Tensor& ta = Value(a);
  const Tensor& tr = Value(row);
  if (ta.Rank() != 2 || tr.Rank() != 1 || tr.Dim(0) != ta.Cols()) {
    throw ShapeError(Msg("add_row: incompatible shapes ", ta.ShapeStr(), " + ", tr.ShapeStr()));
  }
  Node n;
  n.op = Op::kAddRow;
  n.in = {a.id, row.id, -1};
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Rows(); ++i) {
    const double* src = ta.RowPtr(i);
    double* dst = n.out.RowPtr(i);
    for (int64_t j = 0; j < ta.Cols(); ++j) dst[j] = src[j] + tr.At(j);
  }
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[row.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::Scale(Var a, double c) {
  const Tensor& ta = Value(a);
  Node n;
  n.op = Op::kScale;
  n.in = {a.id, -1, -1};
  n.c = c;
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Numel(); ++i) n.out.At(i) = ta.At(i) * c;
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::AddConst(Var a, const Tensor& t) {
  const Tensor& ta = Value(a);
  CheckSameShape(ta, t, "add_const");
  Node n;
  n.op = Op::kAddConst;
  n.in = {a.id, -1, -1};
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Numel(); ++i) n.out.At(i) = ta.At(i) + t.At(i);
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::MulConst(Var a, const Tensor& t) {
  const Tensor& ta = Value(a);
  CheckSameShape(ta, t, "mul_const");
  Node n;
  n.op = Op::kMulConst;
  n.in = {a.id, -1, -1};
  n.aux = t;  // kept for backward
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Numel(); ++i) n.out.At(i) = ta.At(i) * t.At(i);
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::Relu(Var a) {
  const Tensor& ta = Value(a);
  Node n;
  n.op = Op::kRelu;
  n.in = {a.id, -1, -1};
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Numel(); ++i) n.out.At(i) = std::max(0.0, ta.At(i));
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::SoftmaxRows(Var a) {
  const Tensor& ta = Value(a);
  if (ta.Rank() != 2 || ta.Cols() < 1) {
    throw ShapeError(Msg("softmax: need rank-2 with nonempty rows, got ", ta.ShapeStr()));
  }
  Node n;
  n.op = Op::kSoftmaxRows;
  n.in = {a.id, -1, -1};
  n.out = Tensor(ta.Shape());
  for (int64_t i = 0; i < ta.Rows(); ++i) {
    const double* x = ta.RowPtr(i);
    double* y = n.out.RowPtr(i);
    double m = x[0];
    for (int64_t j = 1; j < ta.Cols(); ++j) m = std::max(m, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < ta.Cols(); ++j) {
      y[j] = std::exp(x[j] - m);
      sum += y[j];
    }
    double inv = 1.0 / sum;
    for (int64_t j = 0; j < ta.Cols(); ++j) y[j] *= inv;
  }
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::LayerNormRows(Var x, Var gain, Var bias, double eps) {
  const Tensor& tx = Value(x);
  const Tensor& tg = Value(gain);
  const Tensor& tb = Value(bias);
  if (tx.Rank() != 2 || tx.Cols() < 2) {
    throw ShapeError(Msg("layer_norm: need rank-2 with >= 2 columns, got ", tx.ShapeStr()));
  }
  if (tg.Rank() != 1 || tg.Dim(0) != tx.Cols() || tb.Rank() != 1 || tb.Dim(0) != tx.Cols()) {
    throw ShapeError(Msg("layer_norm: gain/bias ", tg.ShapeStr(), "/", tb.ShapeStr(),
                         " do not match ", tx.ShapeStr()));
  }
  Node n;
  n.op = Op::kLayerNorm;
  n.in = {x.id, gain.id, bias.id};
  n.c = eps;
  n.out = Tensor(tx.Shape());
  n.aux = Tensor(tx.Shape());            // xhat
  n.aux2 = Tensor({tx.Rows()});          // inv stddev per row
  const int64_t d = tx.Cols();
  for (int64_t i = 0; i < tx.Rows(); ++i) {
    const double* xi = tx.RowPtr(i);
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    n.aux2.At(i) = inv;
    double* xh = n.aux.RowPtr(i);
    double* y = n.out.RowPtr(i);
    for (int64_t j = 0; j < d; ++j) {
      xh[j] = (xi[j] - mean) * inv;
      y[j] = xh[j] * tg.At(j) + tb.At(j);
    }
  }
  n.needs_grad = nodes_[x.id].needs_grad || nodes_[gain.id].needs_grad ||
                 nodes_[bias.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::LookupRows(Var table, std::vector<int64_t> ids) {
  const Tensor& tt = Value(table);
  if (tt.Rank() != 2) {
    throw ShapeError(Msg("lookup: table must be rank-2, got ", tt.ShapeStr()));
  }
  for (int64_t id : ids) {
    if (id < 0 || id >= tt.Rows()) {
      throw UsageError(Msg("lookup: id ", id, " out of range [0, ", tt.Rows(), ")"));
    }
  }
  Node n;
  n.op = Op::kLookupRows;
  n.in = {table.id, -1, -1};
  n.ids = std::move(ids);
  n.out = Tensor({static_cast<int64_t>(n.ids.size()), tt.Cols()});
  for (size_t s = 0; s < n.ids.size(); ++s) {
    std::memcpy(n.out.RowPtr(static_cast<int64_t>(s)), tt.RowPtr(n.ids[s]),
                static_cast<size_t>(tt.Cols()) * sizeof(double));
  }
  n.needs_grad = nodes_[table.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  int64_t rows = Value(parts[0]).Rows();
  int64_t cols = 0;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    if (t.Rank() != 2 || t.Rows() != rows) {
      throw ShapeError(Msg("concat: row mismatch ", t.ShapeStr()));
    }
    cols += t.Cols();
  }
  Node n;
  n.op = Op::kConcatCols;
  n.out = Tensor({rows, cols});
  n.needs_grad = false;
  for (Var p : parts) {
    n.ins.push_back(p.id);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  int64_t off = 0;
  for (Var p : parts) {
    const Tensor& t = Value(p);
    for (int64_t i = 0; i < rows; ++i) {
      std::memcpy(n.out.RowPtr(i) + off, t.RowPtr(i),
                  static_cast<size_t>(t.Cols()) * sizeof(double));
    }
    off += t.Cols();
  }
  return Push(std::move(n));
}

Var Tape::SliceRows(Var a, int64_t begin, int64_t end) {
  const Tensor& ta = Value(a);
  if (ta.Rank() != 2 || begin < 0 || end > ta.Rows() || begin >= end) {
    throw ShapeError(Msg("slice: rows [", begin, ", ", end, ") invalid for ", ta.ShapeStr()));
  }
  Node n;
  n.op = Op::kSliceRows;
  n.in = {a.id, -1, -1};
  n.i0 = begin;
  n.i1 = end;
  n.out = Tensor({end - begin, ta.Cols()});
  std::memcpy(n.out.Data(), ta.RowPtr(begin),
              static_cast<size_t>((end - begin) * ta.Cols()) * sizeof(double));
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::MeanRows(Var a) {
  const Tensor& ta = Value(a);
  if (ta.Rank() != 2 || ta.Rows() < 1) {
    throw ShapeError(Msg("mean_rows: need rank-2 with rows, got ", ta.ShapeStr()));
  }
  Node n;
  n.op = Op::kMeanRows;
  n.in = {a.id, -1, -1};
  n.out = Tensor({1, ta.Cols()});
  double inv = 1.0 / static_cast<double>(ta.Rows());
  for (int64_t i = 0; i < ta.Rows(); ++i) {
    const double* src = ta.RowPtr(i);
    for (int64_t j = 0; j < ta.Cols(); ++j) n.out.At(0, j) += src[j];
  }
  for (int64_t j = 0; j < ta.Cols(); ++j) n.out.At(0, j) *= inv;
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::Sum(Var a) {
  const Tensor& ta = Value(a);
  Node n;
  n.op = Op::kSum;
  n.in = {a.id, -1, -1};
  n.out = Tensor({1});
  double acc = 0.0;
  for (int64_t i = 0; i < ta.Numel(); ++i) acc += ta.At(i);
  n.out.At(0) = acc;
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::SumSquares(Var a) {
  const Tensor& ta = Value(a);
  Node n;
  n.op = Op::kSumSquares;
  n.in = {a.id, -1, -1};
  n.out = Tensor({1});
  n.out.At(0) = kernels::Dot(ta.Data(), ta.Data(), static_cast<size_t>(ta.Numel()));
  n.needs_grad = nodes_[a.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::SmoothedCrossEntropy(Var logits, std::vector<int64_t> targets, double smoothing) {
  const Tensor& tl = Value(logits);
  if (tl.Rank() != 2 || tl.Rows() != static_cast<int64_t>(targets.size())) {
    throw ShapeError(Msg("cross_entropy: logits ", tl.ShapeStr(), " vs ",
                         targets.size(), " targets"));
  }
  const int64_t C = tl.Cols();
  for (int64_t t : targets) {
    if (t < 0 || t >= C) {
      throw UsageError(Msg("cross_entropy: target ", t, " out of range [0, ", C, ")"));
    }
  }
  Node n;
  n.op = Op::kSmoothedCE;
  n.in = {logits.id, -1, -1};
  n.ids = std::move(targets);
  n.c = smoothing;
  n.aux = Tensor(tl.Shape());  // softmax probabilities, for backward
  n.out = Tensor({1});
  const int64_t S = tl.Rows();
  const double q_uniform = smoothing / static_cast<double>(C);
  double total = 0.0;
  for (int64_t i = 0; i < S; ++i) {
    const double* x = tl.RowPtr(i);
    double m = x[0];
    for (int64_t j = 1; j < C; ++j) m = std::max(m, x[j]);
    double sum = 0.0;
    double* p = n.aux.RowPtr(i);
    for (int64_t j = 0; j < C; ++j) {
      p[j] = std::exp(x[j] - m);
      sum += p[j];
    }
    double log_sum = std::log(sum) + m;
    double inv = 1.0 / sum;
    for (int64_t j = 0; j < C; ++j) p[j] *= inv;
    // loss_i = -sum_c q_c (x_c - log_sum), q = smoothing/C + (1-smoothing) one-hot
    double row = 0.0;
    for (int64_t j = 0; j < C; ++j) row -= q_uniform * (x[j] - log_sum);
    row -= (1.0 - smoothing) * (x[n.ids[static_cast<size_t>(i)]] - log_sum);
    total += row;
  }
  n.out.At(0) = total / static_cast<double>(S);
  n.needs_grad = nodes_[logits.id].needs_grad;
  return Push(std::move(n));
}

Var Tape::Dropout(Var a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw UsageError(Msg("dropout: rate must be in [0,1), got ", rate));
  }
  if (rate == 0.0) return a;
  const Tensor& ta = Value(a);
  Tensor mask(ta.Shape());
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  for (int64_t i = 0; i < mask.Numel(); ++i) {
    mask.At(i) = rng.Uniform() < keep ? inv_keep : 0.0;
  }
  return MulConst(a, mask);
}

const Tensor& Tape::Value(Var v) const {
  if (!v.Valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw UsageError("value: invalid var");
  }
  return ValueOf(v.id);
}

Tensor& Tape::GradBuf(int id) {
  Tensor& g = grads_[static_cast<size_t>(id)];
  if (g.Numel() == 0) g = Tensor(ValueOf(id).Shape());
  return g;
}

void Tape::Backward(Var loss, double seed) {
  if (!loss.Valid() || loss.id >= static_cast<int>(nodes_.size())) {
    throw UsageError("backward: invalid loss var");
  }
  if (ValueOf(loss.id).Numel() != 1) {
    throw UsageError(Msg("backward: loss must be scalar, got ",
                         ValueOf(loss.id).ShapeStr()));
  }
  grads_.assign(nodes_.size(), Tensor());
  GradBuf(loss.id).At(0) = seed;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) continue;
    if (grads_[static_cast<size_t>(id)].Numel() == 0) continue;  // not on path
    if (n.op == Op::kParam && n.sink != nullptr) {
      const Tensor& g = grads_[static_cast<size_t>(id)];
      double* dst = n.sink->Data();
      const double* src = g.Data();
      for (int64_t i = 0; i < g.Numel(); ++i) dst[i] += src[i];
      continue;
    }
    BackwardNode(id);
  }
}

void Tape::BackwardNode(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& g = grads_[static_cast<size_t>(id)];
  auto needs = [&](int in) { return in >= 0 && nodes_[static_cast<size_t>(in)].needs_grad; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;

    case Op::kMatmulNN: {
      const Tensor& a = ValueOf(n.in[0]);
      const Tensor& b = ValueOf(n.in[1]);
      if (needs(n.in[0])) {
        // dA += g . B^T
        kernels::MatmulNT(g.Data(), b.Data(), GradBuf(n.in[0]).Data(),
                          static_cast<size_t>(g.Rows()), static_cast<size_t>(g.Cols()),
                          static_cast<size_t>(b.Rows()), /*accumulate=*/true);
      }
      if (needs(n.in[1])) {
        // dB += A^T . g
        kernels::MatmulTN(a.Data(), g.Data(), GradBuf(n.in[1]).Data(),
                          static_cast<size_t>(a.Rows()), static_cast<size_t>(a.Cols()),
                          static_cast<size_t>(g.Cols()), /*accumulate=*/true);
      }
      break;
    }

    case Op::kMatmulNT: {
      const Tensor& a = ValueOf(n.in[0]);
      const Tensor& b = ValueOf(n.in[1]);
      if (needs(n.in[0])) {
        // dA += g . B
        kernels::MatmulNN(g.Data(), b.Data(), GradBuf(n.in[0]).Data(),
                          static_cast<size_t>(g.Rows()), static_cast<size_t>(g.Cols()),
                          static_cast<size_t>(b.Cols()), /*accumulate=*/true);
      }
      if (needs(n.in[1])) {
        // dB += g^T . A
        kernels::MatmulTN(g.Data(), a.Data(), GradBuf(n.in[1]).Data(),
                          static_cast<size_t>(g.Rows()), static_cast<size_t>(g.Cols()),
                          static_cast<size_t>(a.Cols()), /*accumulate=*/true);
      }
      break;
    }

    case Op::kAdd: {
      for (int k = 0; k < 2; ++k) {
        if (needs(n.in[k])) {
          Tensor& d = GradBuf(n.in[k]);
          for (int64_t i = 0; i < g.Numel(); ++i) d.At(i) += g.At(i);
        }
      }
      break;
    }

    case Op::kAddRow: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Numel(); ++i) d.At(i) += g.At(i);
      }
      if (needs(n.in[1])) {
        Tensor& d = GradBuf(n.in[1]);
        for (int64_t i = 0; i < g.Rows(); ++i) {
          const double* row = g.RowPtr(i);
          for (int64_t j = 0; j < g.Cols(); ++j) d.At(j) += row[j];
        }
      }
      break;
    }

    case Op::kScale: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Numel(); ++i) d.At(i) += g.At(i) * n.c;
      }
      break;
    }

    case Op::kAddConst: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Numel(); ++i) d.At(i) += g.At(i);
      }
      break;
    }

    case Op::kMulConst: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Numel(); ++i) d.At(i) += g.At(i) * n.aux.At(i);
      }
      break;
    }

    case Op::kRelu: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Numel(); ++i) {
          if (n.out.At(i) > 0.0) d.At(i) += g.At(i);
        }
      }
      break;
    }

    case Op::kSoftmaxRows: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Rows(); ++i) {
          const double* y = n.out.RowPtr(i);
          const double* gi = g.RowPtr(i);
          double dot = kernels::Dot(gi, y, static_cast<size_t>(g.Cols()));
          double* di = d.RowPtr(i);
          for (int64_t j = 0; j < g.Cols(); ++j) di[j] += (gi[j] - dot) * y[j];
        }
      }
      break;
    }

    case Op::kLayerNorm: {
      const Tensor& gain = ValueOf(n.in[1]);
      const int64_t d = n.out.Cols();
      const double invd = 1.0 / static_cast<double>(d);
      if (needs(n.in[1])) {
        Tensor& dg = GradBuf(n.in[1]);
        for (int64_t i = 0; i < g.Rows(); ++i) {
          const double* gi = g.RowPtr(i);
          const double* xh = n.aux.RowPtr(i);
          for (int64_t j = 0; j < d; ++j) dg.At(j) += gi[j] * xh[j];
        }
      }
      if (needs(n.in[2])) {
        Tensor& db = GradBuf(n.in[2]);
        for (int64_t i = 0; i < g.Rows(); ++i) {
          const double* gi = g.RowPtr(i);
          for (int64_t j = 0; j < d; ++j) db.At(j) += gi[j];
        }
      }
      if (needs(n.in[0])) {
        Tensor& dx = GradBuf(n.in[0]);
        for (int64_t i = 0; i < g.Rows(); ++i) {
          const double* gi = g.RowPtr(i);
          const double* xh = n.aux.RowPtr(i);
          const double inv = n.aux2.At(i);
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            double dxh = gi[j] * gain.At(j);
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
          }
          mean_dxhat *= invd;
          mean_dxhat_xhat *= invd;
          double* di = dx.RowPtr(i);
          for (int64_t j = 0; j < d; ++j) {
            double dxh = gi[j] * gain.At(j);
            di[j] += inv * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
          }
        }
      }
      break;
    }

    case Op::kLookupRows: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (size_t s = 0; s < n.ids.size(); ++s) {
          const double* gi = g.RowPtr(static_cast<int64_t>(s));
          double* row = d.RowPtr(n.ids[s]);
          for (int64_t j = 0; j < g.Cols(); ++j) row[j] += gi[j];
        }
      }
      break;
    }

    case Op::kConcatCols: {
      int64_t off = 0;
      for (int in_id : n.ins) {
        const Tensor& part = ValueOf(in_id);
        if (needs(in_id)) {
          Tensor& d = GradBuf(in_id);
          for (int64_t i = 0; i < g.Rows(); ++i) {
            const double* gi = g.RowPtr(i) + off;
            double* di = d.RowPtr(i);
            for (int64_t j = 0; j < part.Cols(); ++j) di[j] += gi[j];
          }
        }
        off += part.Cols();
      }
      break;
    }

    case Op::kSliceRows: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        for (int64_t i = n.i0; i < n.i1; ++i) {
          const double* gi = g.RowPtr(i - n.i0);
          double* di = d.RowPtr(i);
          for (int64_t j = 0; j < g.Cols(); ++j) di[j] += gi[j];
        }
      }
      break;
    }

    case Op::kMeanRows: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        double inv = 1.0 / static_cast<double>(d.Rows());
        for (int64_t i = 0; i < d.Rows(); ++i) {
          double* di = d.RowPtr(i);
          const double* gi = g.RowPtr(0);
          for (int64_t j = 0; j < d.Cols(); ++j) di[j] += gi[j] * inv;
        }
      }
      break;
    }

    case Op::kSum: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        double gv = g.At(0);
        for (int64_t i = 0; i < d.Numel(); ++i) d.At(i) += gv;
      }
      break;
    }

    case Op::kSumSquares: {
      if (needs(n.in[0])) {
        const Tensor& a = ValueOf(n.in[0]);
        Tensor& d = GradBuf(n.in[0]);
        double gv = g.At(0);
        for (int64_t i = 0; i < d.Numel(); ++i) d.At(i) += 2.0 * gv * a.At(i);
      }
      break;
    }

    case Op::kSmoothedCE: {
      if (needs(n.in[0])) {
        Tensor& d = GradBuf(n.in[0]);
        const int64_t S = n.aux.Rows();
        const int64_t C = n.aux.Cols();
        const double q_uniform = n.c / static_cast<double>(C);
        const double scale = g.At(0) / static_cast<double>(S);
        for (int64_t i = 0; i < S; ++i) {
          const double* p = n.aux.RowPtr(i);
          double* di = d.RowPtr(i);
          const int64_t t = n.ids[static_cast<size_t>(i)];
          for (int64_t j = 0; j < C; ++j) {
            double q = q_uniform + (j == t ? 1.0 - n.c : 0.0);
            di[j] += scale * (p[j] - q);
          }
        }
      }
      break;
    }
  }
}

Tensor Tape::Grad(Var v) const {
  if (!v.Valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw UsageError("grad: invalid var");
  }
  if (static_cast<size_t>(v.id) < grads_.size() &&
      grads_[static_cast<size_t>(v.id)].Numel() > 0) {
    return grads_[static_cast<size_t>(v.id)];
  }
  return Tensor(ValueOf(v.id).Shape());
}

// ---- Gradient checking ------------------------------------------------------

std::string GradCheckReport::Summary() const {
  std::string s;
  for (const auto& e : tensors) {
    s += Msg(e.name, " max_rel_err=", e.max_rel_err, "\n");
  }
  s += Msg("overall max_rel_err=", max_rel_err, "\n");
  return s;
}

GradCheckReport GradCheck(std::span<const GradCheckItem> items,
                          const std::function<double()>& loss,
                          double step, double floor) {
  GradCheckReport report;
  for (const GradCheckItem& item : items) {
    if (!item.analytic->SameShape(*item.param)) {
      throw ShapeError(Msg("grad_check: analytic grad shape ", item.analytic->ShapeStr(),
                           " does not match param ", item.param->ShapeStr()));
    }
    GradCheckEntry entry;
    entry.name = item.name;
    for (int64_t i = 0; i < item.param->Numel(); ++i) {
      const double saved = item.param->At(i);
      item.param->At(i) = saved + step;
      const double up = loss();
      item.param->At(i) = saved - step;
      const double down = loss();
      item.param->At(i) = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = item.analytic->At(i);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(numeric - analytic) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

// ---- Plain-tensor conveniences ------------------------------------------------

Tensor SoftmaxRowsEval(const Tensor& x) {
  Tape tape;
  return tape.Value(tape.SoftmaxRows(tape.Constant(x)));
}

Tensor LayerNormEval(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Tape tape;
  return tape.Value(tape.LayerNormRows(tape.Constant(x), tape.Constant(gain),
                                       tape.Constant(bias), eps));
}

Tensor MatmulEval(const Tensor& a, const Tensor& b) {
  Tape tape;
  return tape.Value(tape.MatmulNN(tape.Constant(a), tape.Constant(b)));
}

}  // namespace slu
