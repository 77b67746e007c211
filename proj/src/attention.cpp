// src/attention.cpp

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

#include "slu/attention.hpp"

#include <cmath>
#include <fstream>

#include "slu/common.hpp"

namespace slu {

namespace {
constexpr double kMaskPenalty = -1e30;
}

AttentionMask AttentionMask::Causal(int64_t t) {
  AttentionMask m(t, t, false);
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t j = 0; j <= i; ++j) m.Set(i, j, true);
  }
  return m;
}

int64_t AttentionMask::AllowedInRow(int64_t i) const {
  int64_t count = 0;
  for (int64_t j = 0; j < cols_; ++j) count += At(i, j) ? 1 : 0;
  return count;
}

AttentionMask AttentionMask::And(const AttentionMask& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError(Msg("mask compose: ", rows_, "x", cols_, " vs ", other.rows_, "x",
                         other.cols_));
  }
  AttentionMask out(rows_, cols_, false);
  for (int64_t i = 0; i < rows_; ++i) {
    for (int64_t j = 0; j < cols_; ++j) out.Set(i, j, At(i, j) && other.At(i, j));
  }
  return out;
}

AttentionMask CausalMask(int64_t t) {
  if (t < 1) throw UsageError(Msg("causal mask: need t >= 1, got ", t));
  return AttentionMask::Causal(t);
}

MultiHeadVars BindMultiHead(Tape& tape, const MultiHeadParams& params) {
  MultiHeadVars vars;
  for (const AttentionHeadParams& h : params.heads) {
    vars.heads.push_back(HeadVars{tape.Param(h.Wq), tape.Param(h.Wk), tape.Param(h.Wv),
                                  tape.Param(h.Wo)});
  }
  vars.Wc = tape.Param(params.Wc);
  return vars;
}

QkvVars ProjectQkv(Tape& tape, Var y, const HeadVars& head) {
  return QkvVars{tape.MatmulNT(y, head.Wq), tape.MatmulNT(y, head.Wk),
                 tape.MatmulNT(y, head.Wv)};
}

std::pair<Var, Var> ScaledAttention(Tape& tape, Var q, Var k, Var v,
                                    const AttentionMask* mask) {
  const Tensor& tq = tape.Value(q);
  const Tensor& tk = tape.Value(k);
  const Tensor& tv = tape.Value(v);
  if (tq.Cols() != tk.Cols()) {
    throw ShapeError(Msg("attention: q ", tq.ShapeStr(), " and k ", tk.ShapeStr(),
                         " disagree on the head dim"));
  }
  if (tk.Rows() != tv.Rows()) {
    throw ShapeError(Msg("attention: k ", tk.ShapeStr(), " and v ", tv.ShapeStr(),
                         " disagree on the key count"));
  }
  const int64_t head_dim = tq.Cols();

  Var scores = tape.Scale(tape.MatmulNT(q, k), 1.0 / std::sqrt(static_cast<double>(head_dim)));

  Var weights{-1};
  if (mask != nullptr) {
    if (mask->Rows() != tq.Rows() || mask->Cols() != tk.Rows()) {
      throw ShapeError(Msg("attention: mask ", mask->Rows(), "x", mask->Cols(),
                           " does not cover ", tq.Rows(), "x", tk.Rows(), " scores"));
    }
    Tensor additive({mask->Rows(), mask->Cols()});
    Tensor keep({mask->Rows(), mask->Cols()});
    for (int64_t i = 0; i < mask->Rows(); ++i) {
      int64_t allowed = 0;
      for (int64_t j = 0; j < mask->Cols(); ++j) {
        bool ok = mask->At(i, j);
        additive.At(i, j) = ok ? 0.0 : kMaskPenalty;
        keep.At(i, j) = ok ? 1.0 : 0.0;
        allowed += ok ? 1 : 0;
      }
      if (allowed == 0) {
        throw UsageError(Msg("attention: query row ", i, " has no allowed target"));
      }
    }
    weights = tape.MulConst(tape.SoftmaxRows(tape.AddConst(scores, additive)), keep);
  } else {
    weights = tape.SoftmaxRows(scores);
  }

  Var context = tape.MatmulNN(weights, v);
  return {context, weights};
}

Var MultiHead(Tape& tape, Var y, const MultiHeadVars& mh, std::optional<Var> context,
              const AttentionMask* mask, MultiHeadTrace* trace) {
  if (mh.heads.empty()) throw UsageError("multi_head: no heads");
  Var kv_source = context.has_value() ? *context : y;
  std::vector<Var> projected;
  projected.reserve(mh.heads.size());
  for (const HeadVars& head : mh.heads) {
    Var q = tape.MatmulNT(y, head.Wq);
    Var k = tape.MatmulNT(kv_source, head.Wk);
    Var v = tape.MatmulNT(kv_source, head.Wv);
    auto [ctx, weights] = ScaledAttention(tape, q, k, v, mask);
    if (trace != nullptr) {
      trace->q.push_back(tape.Value(q));
      trace->k.push_back(tape.Value(k));
      trace->v.push_back(tape.Value(v));
      trace->weights.push_back(tape.Value(weights));
    }
    projected.push_back(tape.MatmulNT(ctx, head.Wo));  // back to d
  }
  Var cat = projected.size() == 1 ? projected[0] : tape.ConcatCols(projected);
  return tape.MatmulNT(cat, mh.Wc);
}

std::pair<Tensor, Tensor> ScaledAttentionEval(const Tensor& q, const Tensor& k,
                                              const Tensor& v, const AttentionMask* mask) {
  Tape tape;
  auto [ctx, weights] =
      ScaledAttention(tape, tape.Constant(q), tape.Constant(k), tape.Constant(v), mask);
  return {tape.Value(ctx), tape.Value(weights)};
}

Tensor MultiHeadEval(const Tensor& y, const MultiHeadParams& params, const Tensor* context,
                     const AttentionMask* mask) {
  Tape tape;
  Var vy = tape.Constant(y);
  std::optional<Var> vctx;
  if (context != nullptr) vctx = tape.Constant(*context);
  MultiHeadVars vars = BindMultiHead(tape, params);
  return tape.Value(MultiHead(tape, vy, vars, vctx, mask));
}

void WriteAttentionCsv(const std::string& path, const Tensor& weights) {
  std::ofstream os(path);
  if (!os) throw DataError(Msg("attention csv: cannot open ", path));
  os.precision(17);
  for (int64_t i = 0; i < weights.Rows(); ++i) {
    for (int64_t j = 0; j < weights.Cols(); ++j) {
      if (j) os << ",";
      os << weights.At(i, j);
    }
    os << "\n";
  }
  if (!os) throw DataError(Msg("attention csv: write failed: ", path));
}

}  // namespace slu
