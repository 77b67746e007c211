// slu/model.hpp

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

// The full network: linear input embedding plus positional table, a stack
// of self-attention + feed-forward encoder layers, and either a pooled
// classification head (one class per label combination) or a masked
// decoder stack that emits the label sequence token by token.
//
// Every forward pass builds onto a Tape, so the same code path serves
// training (with gradients) and inference (forward only); row-wise ops
// make a stepwise decode equal the full-sequence pass.

#ifndef SLU_MODEL_HPP_
#define SLU_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slu/attention.hpp"
#include "slu/graph.hpp"
#include "slu/labels.hpp"
#include "slu/rng.hpp"
#include "slu/tensor.hpp"

namespace slu {

enum class Mode { kClassification, kHierarchical };

std::string ModeName(Mode mode);
Mode ModeFromName(const std::string& name);

constexpr double kLayerNormEps = 1e-6;

struct ModelConfig {
  int64_t input_dim = 320;    // p
  int64_t model_dim = 128;    // d
  int64_t head_dim = 64;      // n
  int64_t num_heads = 3;      // L
  int64_t enc_layers = 5;
  int64_t dec_layers = 1;
  int64_t ffn_inner = 512;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  int64_t max_positions = 1024;
  Mode mode = Mode::kClassification;
  LabelSpace label_space = DefaultLabelSpace();

  void Validate() const;
  /// Output width: class count (classification) or token vocab (hierarchical).
  int64_t OutputDim() const;

  std::string ToJsonText() const;
  static ModelConfig FromJsonText(const std::string& text);
  static ModelConfig FromJsonFile(const std::string& path);
};

struct EncoderLayerParams {
  MultiHeadParams self_attn;
  Tensor norm1_gain, norm1_bias;
  Tensor ffn_w1, ffn_b1;  // d x inner, inner
  Tensor ffn_w2, ffn_b2;  // inner x d, d
  Tensor norm2_gain, norm2_bias;
};

struct DecoderLayerParams {
  MultiHeadParams self_attn;
  Tensor norm1_gain, norm1_bias;
  MultiHeadParams cross_attn;
  Tensor norm2_gain, norm2_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor norm3_gain, norm3_bias;
};

struct ModelParams {
  ModelConfig config;

  Tensor input_proj;   // d x p
  Tensor input_bias;   // d
  Tensor pos_table;    // maxT x d, learned, initialized to the sinusoid table
  std::vector<EncoderLayerParams> encoder;

  // hierarchical mode
  std::vector<DecoderLayerParams> decoder;
  Tensor target_embed;  // V x d

  // classification mode
  Tensor cls_hidden_w;  // d x d
  Tensor cls_hidden_b;  // d

  Tensor output_proj;  // d x OutputDim
  Tensor output_bias;  // OutputDim

  /// Shaped but zero-valued parameters (gradient/moment buffers).
  static ModelParams Shaped(const ModelConfig& config);
  /// Random initialization: uniform +-sqrt(6/(fan_in+fan_out)) matrices,
  /// zero biases, unit norm gains, sinusoid-initialized positional table.
  static ModelParams Init(const ModelConfig& config, uint64_t seed);

  /// Visits every learned tensor with its dotted name, in the fixed
  /// serialization order (e.g. "encoder.3.self_attn.head.1.Wq").
  void Visit(const std::function<void(const std::string&, Tensor&)>& fn);
  void Visit(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  int64_t ScalarCount() const;
  void FillZero();
  void CheckFinite(const std::string& what) const;
};

/// Scalar count as a pure function of the configuration.
int64_t ParameterCount(const ModelConfig& config);

/// pos[t, 2i] = sin(t / 10000^(2i/d)), pos[t, 2i+1] = cos of the same
/// angle. d must be even.
Tensor SinusoidalPositions(int64_t max_positions, int64_t d);

// ---- forward building -------------------------------------------------------------

struct EncoderLayerTrace {
  MultiHeadTrace self_attn;
  Tensor z, h, s, r;
};

struct DecoderLayerTrace {
  MultiHeadTrace self_attn;
  MultiHeadTrace cross_attn;
  Tensor z, h, z2, h2, s, r;
};

struct ActivationTrace {
  Tensor embedded;      // encoder input after embedding
  Tensor dec_embedded;  // decoder input after embedding (hierarchical)
  std::vector<EncoderLayerTrace> encoder;
  std::vector<DecoderLayerTrace> decoder;
};

struct ForwardOptions {
  bool train = false;
  Rng* rng = nullptr;  // required when train is true and dropout > 0
  ActivationTrace* trace = nullptr;
};

/// Mirror of ModelParams used to accumulate gradients.
using ModelGrads = ModelParams;

/// Binds the parameter set onto a tape once per forward pass. When `grads`
/// is given, Backward accumulates parameter gradients into it.
class BoundModel {
 public:
  BoundModel(Tape& tape, const ModelParams& params, ModelGrads* grads = nullptr);

  /// Feature rows (T x p) -> embedded rows (T x d): W.x + b + pos[t], then
  /// train-mode dropout.
  Var Embed(const Tensor& features, const ForwardOptions& opts);

  Var EncoderLayer(Var y, int64_t layer, const ForwardOptions& opts);

  /// Embed + full encoder stack.
  Var Encode(const Tensor& features, const ForwardOptions& opts);

  Var DecoderLayer(Var yd, Var enc_out, int64_t layer, const ForwardOptions& opts);

  /// Teacher-forced decoder pass over `input_tokens` (starting with sop);
  /// returns logits for every position (S x V).
  Var DecodeLogits(const std::vector<int>& input_tokens, Var enc_out,
                   const ForwardOptions& opts);

  /// Mean-pool over frames -> hidden relu layer -> class logits (1 x C).
  Var ClassificationLogits(Var enc_out, const ForwardOptions& opts);

  Tape& tape() { return tape_; }

 private:
  Var BindMh(const MultiHeadParams& p, MultiHeadParams* g, MultiHeadVars* out);
  Var Ffn(Var h, Var w1, Var b1, Var w2, Var b2);
  Var Drop(Var v, const ForwardOptions& opts);

  Tape& tape_;
  const ModelParams& params_;
  ModelGrads* grads_;

  Var input_proj_, input_bias_, pos_table_;
  struct EncVars {
    MultiHeadVars self_attn;
    Var n1g, n1b, w1, b1, w2, b2, n2g, n2b;
  };
  struct DecVars {
    MultiHeadVars self_attn;
    Var n1g, n1b;
    MultiHeadVars cross_attn;
    Var n2g, n2b;
    Var w1, b1, w2, b2;
    Var n3g, n3b;
  };
  std::vector<EncVars> enc_;
  std::vector<DecVars> dec_;
  Var target_embed_, cls_w_, cls_b_, out_w_, out_b_;
};

// ---- eval conveniences ---------------------------------------------------------------

Tensor EncodeEval(const ModelParams& params, const Tensor& features,
                  ActivationTrace* trace = nullptr);

Tensor ClassificationLogitsEval(const ModelParams& params, const Tensor& features,
                                ActivationTrace* trace = nullptr);

/// Logits for the next token given a prefix (starting with sop): runs the
/// decoder over the prefix and returns the last position's row (V).
Tensor DecodeStepLogits(const ModelParams& params, const Tensor& enc_out,
                        const std::vector<int>& prefix);

/// Teacher-forced logits at every position (S x V).
Tensor DecodeFullLogits(const ModelParams& params, const Tensor& enc_out,
                        const std::vector<int>& input_tokens,
                        ActivationTrace* trace = nullptr);

/// End-to-end gradient check over every learned tensor: builds a seeded
/// random input (and, in hierarchical mode, a teacher-forced target
/// sequence), takes the smoothed cross entropy as the loss, and compares
/// analytic gradients against central finite differences.
GradCheckReport ModelGradCheck(const ModelConfig& config, int64_t frames, uint64_t seed);

// ---- checkpoints -----------------------------------------------------------------------

/// Format: magic "SLUM", version u32, length-prefixed JSON config, then
/// per-tensor records (dotted name, rank u32, dims u32[], f32 LE data).
void SaveCheckpoint(const std::string& path, const ModelParams& params);
ModelParams LoadCheckpoint(const std::string& path);

}  // namespace slu

#endif  // SLU_MODEL_HPP_
