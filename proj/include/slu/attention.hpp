// slu/attention.hpp

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

// Scaled dot-product attention and its multi-head composition.
//
// Per head: rows of the input are projected by Wq/Wk/Wv (n x d) into
// query/key/value subspaces; attention weights are softmax over
// q.k / sqrt(n) (head dim, never the model dim); the weighted value sum is
// projected back to d by the per-head Wo (d x n). The L head outputs are
// concatenated in head order and recombined by Wc (d x (L*d)).
//
// Masked positions receive an additive -1e30 before the softmax and are
// zeroed exactly after it, so disallowed weights are 0.0 by construction,
// not merely tiny.

#ifndef SLU_ATTENTION_HPP_
#define SLU_ATTENTION_HPP_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "slu/graph.hpp"
#include "slu/tensor.hpp"

namespace slu {

struct AttentionHeadParams {
  Tensor Wq;  // n x d
  Tensor Wk;  // n x d
  Tensor Wv;  // n x d
  Tensor Wo;  // d x n, per-head output projection
};

struct MultiHeadParams {
  std::vector<AttentionHeadParams> heads;
  Tensor Wc;  // d x (L*d), concat projection
};

/// Boolean attention mask; At(i, j) answers "may query row i attend to key
/// row j".
class AttentionMask {
 public:
  AttentionMask(int64_t rows, int64_t cols, bool allowed = true)
      : rows_(rows), cols_(cols), allowed_(static_cast<size_t>(rows * cols), allowed ? 1 : 0) {}

  static AttentionMask Causal(int64_t t);

  bool At(int64_t i, int64_t j) const {
    return allowed_[static_cast<size_t>(i * cols_ + j)] != 0;
  }
  void Set(int64_t i, int64_t j, bool allowed) {
    allowed_[static_cast<size_t>(i * cols_ + j)] = allowed ? 1 : 0;
  }
  int64_t Rows() const { return rows_; }
  int64_t Cols() const { return cols_; }
  int64_t AllowedInRow(int64_t i) const;

  /// Compose with another mask of the same shape (logical and).
  AttentionMask And(const AttentionMask& other) const;

 private:
  int64_t rows_;
  int64_t cols_;
  std::vector<uint8_t> allowed_;
};

AttentionMask CausalMask(int64_t t);

// ---- graph builders ------------------------------------------------------------

struct HeadVars {
  Var Wq, Wk, Wv, Wo;
};

struct MultiHeadVars {
  std::vector<HeadVars> heads;
  Var Wc;
};

/// Binds plain parameters onto a tape (no gradient sinks — test use).
MultiHeadVars BindMultiHead(Tape& tape, const MultiHeadParams& params);

struct QkvVars {
  Var q, k, v;
};

/// Q = y.Wq^T, K = y.Wk^T, V = y.Wv^T (rows of y mapped independently).
QkvVars ProjectQkv(Tape& tape, Var y, const HeadVars& head);

/// Attention over projected rows. Returns (context: Tq x n, weights:
/// Tq x Tk). A query row with no allowed key is an error.
std::pair<Var, Var> ScaledAttention(Tape& tape, Var q, Var k, Var v,
                                    const AttentionMask* mask = nullptr);

/// Per-head intermediates captured during a multi-head pass, in head order.
struct MultiHeadTrace {
  std::vector<Tensor> q, k, v, weights;
};

/// Full multi-head block: per-head attention (queries from y; keys/values
/// from `context` when given, else self), per-head output projection,
/// concat in head order, concat projection. A non-null `trace` receives
/// value snapshots of each head's q/k/v and attention weights.
Var MultiHead(Tape& tape, Var y, const MultiHeadVars& mh,
              std::optional<Var> context = std::nullopt,
              const AttentionMask* mask = nullptr,
              MultiHeadTrace* trace = nullptr);

// ---- plain-tensor conveniences ---------------------------------------------------

std::pair<Tensor, Tensor> ScaledAttentionEval(const Tensor& q, const Tensor& k,
                                              const Tensor& v,
                                              const AttentionMask* mask = nullptr);

Tensor MultiHeadEval(const Tensor& y, const MultiHeadParams& params,
                     const Tensor* context = nullptr,
                     const AttentionMask* mask = nullptr);

/// Writes one head's weight matrix as CSV (rows = query frames, cols = key
/// frames).
void WriteAttentionCsv(const std::string& path, const Tensor& weights);

}  // namespace slu

#endif  // SLU_ATTENTION_HPP_
