// slu/graph.hpp

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

// Reverse-mode differentiation over an eagerly evaluated tape of tensor
// primitives. Ops compute their value at construction; Backward walks the
// tape once in reverse, so every node feeding the loss is visited exactly
// once. Construction order gives the topological order by definition.

#ifndef SLU_GRAPH_HPP_
#define SLU_GRAPH_HPP_

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slu/rng.hpp"
#include "slu/tensor.hpp"

namespace slu {

/// Handle to a tape node.
struct Var {
  int id = -1;
  bool Valid() const { return id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- Leaves ------------------------------------------------------------

  /// Non-differentiable input. The tensor is referenced, not copied; it
  /// must outlive the tape.
  Var Constant(const Tensor& value);

  /// Trainable leaf. If grad_sink is given, Backward accumulates the
  /// parameter gradient into it (shape must match); otherwise the gradient
  /// is only retrievable through Grad().
  Var Param(const Tensor& value, Tensor* grad_sink = nullptr);

  // ---- Primitives ----------------------------------------------------------

  Var MatmulNN(Var a, Var b);            ///< a(m,k) . b(k,p)
  Var MatmulNT(Var a, Var b);            ///< a(m,k) . b(p,k)^T
  Var Add(Var a, Var b);                 ///< same shape
  Var AddRow(Var a, Var row);            ///< a(m,n) + row(n) broadcast over rows
  Var Scale(Var a, double c);
  Var AddConst(Var a, const Tensor& t);  ///< a + t (t fixed; mask additive)
  Var MulConst(Var a, const Tensor& t);  ///< a .* t (t fixed; masks, dropout)
  Var Relu(Var a);
  Var SoftmaxRows(Var a);                ///< softmax along the last axis of a rank-2 tensor
  Var LayerNormRows(Var x, Var gain, Var bias, double eps);
  Var LookupRows(Var table, std::vector<int64_t> ids);
  Var ConcatCols(std::span<const Var> parts);
  Var SliceRows(Var a, int64_t begin, int64_t end);
  Var MeanRows(Var a);                   ///< (m,n) -> (1,n)
  Var Sum(Var a);                        ///< scalar
  Var SumSquares(Var a);                 ///< scalar
  /// Mean over rows of the label-smoothed cross entropy between each
  /// logits row and its target id. smoothing=0 gives plain cross entropy.
  Var SmoothedCrossEntropy(Var logits, std::vector<int64_t> targets, double smoothing);

  /// Inverted-scaling dropout: multiplies by a fresh {0, 1/keep} mask
  /// sampled from rng. rate==0 returns a unchanged. Train-mode only by
  /// construction — eval paths simply never call it.
  Var Dropout(Var a, double rate, Rng& rng);

  // ---- Execution -----------------------------------------------------------

  const Tensor& Value(Var v) const;

  /// Reverse pass from a scalar loss. `seed` scales every gradient (use
  /// 1/batch for mean-of-losses accumulation). Non-scalar loss is an error.
  void Backward(Var loss, double seed = 1.0);

  /// Gradient of the last Backward w.r.t. node v (zeros if v is not on the
  /// path to the loss).
  Tensor Grad(Var v) const;

  int NumNodes() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kConstant, kParam, kMatmulNN, kMatmulNT, kAdd, kAddRow, kScale,
    kAddConst, kMulConst, kRelu, kSoftmaxRows, kLayerNorm, kLookupRows,
    kConcatCols, kSliceRows, kMeanRows, kSum, kSumSquares, kSmoothedCE,
  };

  struct Node {
    Op op;
    std::array<int, 3> in = {-1, -1, -1};
    std::vector<int> ins;            // kConcatCols only
    Tensor out;                      // owned value (leaves use external)
    const Tensor* external = nullptr;
    Tensor* sink = nullptr;
    Tensor aux;                      // op-dependent cache (mask, xhat, probs)
    Tensor aux2;                     // layer-norm inverse stddev
    std::vector<int64_t> ids;        // lookup indices / CE targets
    double c = 0.0;                  // scale factor / eps / smoothing
    int64_t i0 = 0, i1 = 0;          // slice bounds
    bool needs_grad = false;
  };

  const Tensor& ValueOf(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.external != nullptr ? *n.external : n.out;
  }
  Var Push(Node n);
  Tensor& GradBuf(int id);
  void BackwardNode(int id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

// ---- Gradient checking ------------------------------------------------------

struct GradCheckItem {
  std::string name;
  Tensor* param;           // perturbed in place and restored
  const Tensor* analytic;  // gradient to compare against
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_err = 0.0;
  bool Pass(double tol) const { return max_rel_err < tol; }
  std::string Summary() const;
};

/// Central finite differences (default step 1e-5) against the provided
/// analytic gradients. `loss` must re-run the forward pass from scratch at
/// the current parameter values. Per-scalar error is
/// |num - ana| / max(|num|, |ana|, floor); the floor keeps rounding noise
/// on near-zero gradients from dominating the report.
GradCheckReport GradCheck(std::span<const GradCheckItem> items,
                          const std::function<double()>& loss,
                          double step = 1e-5, double floor = 1e-3);

// ---- Plain-tensor conveniences (thin wrappers over one-op tapes) ------------

Tensor SoftmaxRowsEval(const Tensor& x);
Tensor LayerNormEval(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor MatmulEval(const Tensor& a, const Tensor& b);

}  // namespace slu

#endif  // SLU_GRAPH_HPP_
