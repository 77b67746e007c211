// src/model.cpp

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

#include "slu/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "slu/binio.hpp"
#include "slu/common.hpp"

namespace slu {

using nlohmann::json;

std::string ModeName(Mode mode) {
  return mode == Mode::kClassification ? "classification" : "hierarchical";
}

Mode ModeFromName(const std::string& name) {
  if (name == "classification") return Mode::kClassification;
  if (name == "hierarchical") return Mode::kHierarchical;
  throw UsageError(Msg("unknown mode \"", name, "\" (classification|hierarchical)"));
}

void ModelConfig::Validate() const {
  auto positive = [](int64_t v, const char* what) {
    if (v < 1) throw UsageError(Msg("config: ", what, " must be >= 1, got ", v));
  };
  positive(input_dim, "input_dim");
  positive(model_dim, "model_dim");
  positive(head_dim, "head_dim");
  positive(num_heads, "num_heads");
  positive(enc_layers, "enc_layers");
  positive(ffn_inner, "ffn_inner");
  positive(max_positions, "max_positions");
  if (mode == Mode::kHierarchical) positive(dec_layers, "dec_layers");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw UsageError(Msg("config: dropout must be in [0,1), got ", dropout));
  }
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw UsageError(Msg("config: label_smoothing must be in [0,1), got ", label_smoothing));
  }
  if (model_dim % 2 != 0) {
    throw UsageError("config: model_dim must be even for the positional table");
  }
  if (label_space.NumDomains() < 1) throw UsageError("config: empty label space");
}

int64_t ModelConfig::OutputDim() const {
  return mode == Mode::kClassification ? label_space.ClassCount()
                                       : static_cast<int64_t>(label_space.VocabSize());
}

std::string ModelConfig::ToJsonText() const {
  json j;
  j["input_dim"] = input_dim;
  j["model_dim"] = model_dim;
  j["head_dim"] = head_dim;
  j["num_heads"] = num_heads;
  j["enc_layers"] = enc_layers;
  j["dec_layers"] = dec_layers;
  j["ffn_inner"] = ffn_inner;
  j["dropout"] = dropout;
  j["label_smoothing"] = label_smoothing;
  j["max_positions"] = max_positions;
  j["mode"] = ModeName(mode);
  j["label_space"] = json::parse(label_space.ToJsonText());
  return j.dump(2);
}

ModelConfig ModelConfig::FromJsonText(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(Msg("config: bad json: ", e.what()));
  }
  ModelConfig c;
  auto get = [&j](const char* key, auto& out) {
    if (j.contains(key)) out = j[key].template get<std::decay_t<decltype(out)>>();
  };
  get("input_dim", c.input_dim);
  get("model_dim", c.model_dim);
  get("head_dim", c.head_dim);
  get("num_heads", c.num_heads);
  get("enc_layers", c.enc_layers);
  get("dec_layers", c.dec_layers);
  get("ffn_inner", c.ffn_inner);
  get("dropout", c.dropout);
  get("label_smoothing", c.label_smoothing);
  get("max_positions", c.max_positions);
  if (j.contains("mode")) c.mode = ModeFromName(j["mode"].get<std::string>());
  if (j.contains("label_space")) {
    c.label_space = LabelSpace::FromJsonText(j["label_space"].dump());
  }
  c.Validate();
  return c;
}

ModelConfig ModelConfig::FromJsonFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(Msg("config: cannot open ", path));
  std::stringstream ss;
  ss << is.rdbuf();
  return FromJsonText(ss.str());
}

// ---- parameter construction ----------------------------------------------------

namespace {

MultiHeadParams ShapedMultiHead(int64_t num_heads, int64_t n, int64_t d) {
  MultiHeadParams p;
  for (int64_t h = 0; h < num_heads; ++h) {
    AttentionHeadParams head;
    head.Wq = Tensor({n, d});
    head.Wk = Tensor({n, d});
    head.Wv = Tensor({n, d});
    head.Wo = Tensor({d, n});
    p.heads.push_back(std::move(head));
  }
  p.Wc = Tensor({d, num_heads * d});
  return p;
}

void XavierFill(Tensor& t, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(t.Rows() + t.Cols()));
  t.FillUniform(rng, -limit, limit);
}

void InitMultiHead(MultiHeadParams& p, Rng& rng) {
  for (AttentionHeadParams& head : p.heads) {
    XavierFill(head.Wq, rng);
    XavierFill(head.Wk, rng);
    XavierFill(head.Wv, rng);
    XavierFill(head.Wo, rng);
  }
  XavierFill(p.Wc, rng);
}

}  // namespace

ModelParams ModelParams::Shaped(const ModelConfig& config) {
  config.Validate();
  ModelParams p;
  p.config = config;
  const int64_t d = config.model_dim;
  const int64_t n = config.head_dim;
  const int64_t inner = config.ffn_inner;

  p.input_proj = Tensor({d, config.input_dim});
  p.input_bias = Tensor({d});
  p.pos_table = Tensor({config.max_positions, d});

  for (int64_t l = 0; l < config.enc_layers; ++l) {
    EncoderLayerParams layer;
    layer.self_attn = ShapedMultiHead(config.num_heads, n, d);
    layer.norm1_gain = Tensor({d});
    layer.norm1_bias = Tensor({d});
    layer.ffn_w1 = Tensor({d, inner});
    layer.ffn_b1 = Tensor({inner});
    layer.ffn_w2 = Tensor({inner, d});
    layer.ffn_b2 = Tensor({d});
    layer.norm2_gain = Tensor({d});
    layer.norm2_bias = Tensor({d});
    p.encoder.push_back(std::move(layer));
  }

  if (config.mode == Mode::kHierarchical) {
    for (int64_t l = 0; l < config.dec_layers; ++l) {
      DecoderLayerParams layer;
      layer.self_attn = ShapedMultiHead(config.num_heads, n, d);
      layer.norm1_gain = Tensor({d});
      layer.norm1_bias = Tensor({d});
      layer.cross_attn = ShapedMultiHead(config.num_heads, n, d);
      layer.norm2_gain = Tensor({d});
      layer.norm2_bias = Tensor({d});
      layer.ffn_w1 = Tensor({d, inner});
      layer.ffn_b1 = Tensor({inner});
      layer.ffn_w2 = Tensor({inner, d});
      layer.ffn_b2 = Tensor({d});
      layer.norm3_gain = Tensor({d});
      layer.norm3_bias = Tensor({d});
      p.decoder.push_back(std::move(layer));
    }
    p.target_embed = Tensor({static_cast<int64_t>(config.label_space.VocabSize()), d});
  } else {
    p.cls_hidden_w = Tensor({d, d});
    p.cls_hidden_b = Tensor({d});
  }

  p.output_proj = Tensor({d, config.OutputDim()});
  p.output_bias = Tensor({config.OutputDim()});
  return p;
}

ModelParams ModelParams::Init(const ModelConfig& config, uint64_t seed) {
  ModelParams p = Shaped(config);
  Rng rng(MixSeed(seed, 0x6d6f64656c));

  XavierFill(p.input_proj, rng);
  p.pos_table = SinusoidalPositions(config.max_positions, config.model_dim);

  for (EncoderLayerParams& layer : p.encoder) {
    InitMultiHead(layer.self_attn, rng);
    layer.norm1_gain.Fill(1.0);
    layer.norm2_gain.Fill(1.0);
    XavierFill(layer.ffn_w1, rng);
    XavierFill(layer.ffn_w2, rng);
  }
  for (DecoderLayerParams& layer : p.decoder) {
    InitMultiHead(layer.self_attn, rng);
    InitMultiHead(layer.cross_attn, rng);
    layer.norm1_gain.Fill(1.0);
    layer.norm2_gain.Fill(1.0);
    layer.norm3_gain.Fill(1.0);
    XavierFill(layer.ffn_w1, rng);
    XavierFill(layer.ffn_w2, rng);
  }
  if (config.mode == Mode::kHierarchical) {
    XavierFill(p.target_embed, rng);
  } else {
    XavierFill(p.cls_hidden_w, rng);
  }
  XavierFill(p.output_proj, rng);
  return p;
}

namespace {

template <typename Self, typename Fn>
void VisitImpl(Self& p, const Fn& fn) {
  fn("input.W", p.input_proj);
  fn("input.bias", p.input_bias);
  fn("pos_table", p.pos_table);

  auto visit_mh = [&fn](const std::string& prefix, auto& mh) {
    for (size_t h = 0; h < mh.heads.size(); ++h) {
      fn(Msg(prefix, ".head.", h, ".Wq"), mh.heads[h].Wq);
      fn(Msg(prefix, ".head.", h, ".Wk"), mh.heads[h].Wk);
      fn(Msg(prefix, ".head.", h, ".Wv"), mh.heads[h].Wv);
      fn(Msg(prefix, ".head.", h, ".Wo"), mh.heads[h].Wo);
    }
    fn(Msg(prefix, ".Wc"), mh.Wc);
  };

  for (size_t l = 0; l < p.encoder.size(); ++l) {
    auto& layer = p.encoder[l];
    const std::string base = Msg("encoder.", l);
    visit_mh(base + ".self_attn", layer.self_attn);
    fn(base + ".norm1.gain", layer.norm1_gain);
    fn(base + ".norm1.bias", layer.norm1_bias);
    fn(base + ".ffn.W1", layer.ffn_w1);
    fn(base + ".ffn.b1", layer.ffn_b1);
    fn(base + ".ffn.W2", layer.ffn_w2);
    fn(base + ".ffn.b2", layer.ffn_b2);
    fn(base + ".norm2.gain", layer.norm2_gain);
    fn(base + ".norm2.bias", layer.norm2_bias);
  }
  for (size_t l = 0; l < p.decoder.size(); ++l) {
    auto& layer = p.decoder[l];
    const std::string base = Msg("decoder.", l);
    visit_mh(base + ".self_attn", layer.self_attn);
    fn(base + ".norm1.gain", layer.norm1_gain);
    fn(base + ".norm1.bias", layer.norm1_bias);
    visit_mh(base + ".cross_attn", layer.cross_attn);
    fn(base + ".norm2.gain", layer.norm2_gain);
    fn(base + ".norm2.bias", layer.norm2_bias);
    fn(base + ".ffn.W1", layer.ffn_w1);
    fn(base + ".ffn.b1", layer.ffn_b1);
    fn(base + ".ffn.W2", layer.ffn_w2);
    fn(base + ".ffn.b2", layer.ffn_b2);
    fn(base + ".norm3.gain", layer.norm3_gain);
    fn(base + ".norm3.bias", layer.norm3_bias);
  }
  if (p.config.mode == Mode::kHierarchical) {
    fn("target_embed", p.target_embed);
  } else {
    fn("cls_hidden.W", p.cls_hidden_w);
    fn("cls_hidden.bias", p.cls_hidden_b);
  }
  fn("output.W", p.output_proj);
  fn("output.bias", p.output_bias);
}

}  // namespace

void ModelParams::Visit(const std::function<void(const std::string&, Tensor&)>& fn) {
  VisitImpl(*this, fn);
}

void ModelParams::Visit(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  VisitImpl(*this, fn);
}

int64_t ModelParams::ScalarCount() const {
  int64_t count = 0;
  Visit([&count](const std::string&, const Tensor& t) { count += t.Numel(); });
  return count;
}

void ModelParams::FillZero() {
  Visit([](const std::string&, Tensor& t) { t.Fill(0.0); });
}

void ModelParams::CheckFinite(const std::string& what) const {
  Visit([&what](const std::string& name, const Tensor& t) {
    if (!t.AllFinite()) {
      throw NumericError(Msg(what, ": non-finite values in ", name));
    }
  });
}

int64_t ParameterCount(const ModelConfig& config) {
  return ModelParams::Shaped(config).ScalarCount();
}

Tensor SinusoidalPositions(int64_t max_positions, int64_t d) {
  if (d % 2 != 0) throw UsageError(Msg("positional table: d must be even, got ", d));
  Tensor pos({max_positions, d});
  for (int64_t t = 0; t < max_positions; ++t) {
    for (int64_t i = 0; i < d / 2; ++i) {
      double angle = static_cast<double>(t) /
                     std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d));
      pos.At(t, 2 * i) = std::sin(angle);
      pos.At(t, 2 * i + 1) = std::cos(angle);
    }
  }
  return pos;
}

// ---- forward building -----------------------------------------------------------

BoundModel::BoundModel(Tape& tape, const ModelParams& params, ModelGrads* grads)
    : tape_(tape), params_(params), grads_(grads) {
  auto bind = [this](const Tensor& t, Tensor* g) {
    return g != nullptr ? tape_.Param(t, g) : tape_.Param(t);
  };
  const ModelParams& p = params_;
  ModelGrads* g = grads_;

  input_proj_ = bind(p.input_proj, g ? &g->input_proj : nullptr);
  input_bias_ = bind(p.input_bias, g ? &g->input_bias : nullptr);
  pos_table_ = bind(p.pos_table, g ? &g->pos_table : nullptr);

  auto bind_mh = [&](const MultiHeadParams& mh, MultiHeadParams* mg) {
    MultiHeadVars vars;
    for (size_t h = 0; h < mh.heads.size(); ++h) {
      vars.heads.push_back(HeadVars{
          bind(mh.heads[h].Wq, mg ? &mg->heads[h].Wq : nullptr),
          bind(mh.heads[h].Wk, mg ? &mg->heads[h].Wk : nullptr),
          bind(mh.heads[h].Wv, mg ? &mg->heads[h].Wv : nullptr),
          bind(mh.heads[h].Wo, mg ? &mg->heads[h].Wo : nullptr)});
    }
    vars.Wc = bind(mh.Wc, mg ? &mg->Wc : nullptr);
    return vars;
  };

  for (size_t l = 0; l < p.encoder.size(); ++l) {
    const EncoderLayerParams& e = p.encoder[l];
    EncoderLayerParams* eg = g ? &g->encoder[l] : nullptr;
    EncVars v;
    v.self_attn = bind_mh(e.self_attn, eg ? &eg->self_attn : nullptr);
    v.n1g = bind(e.norm1_gain, eg ? &eg->norm1_gain : nullptr);
    v.n1b = bind(e.norm1_bias, eg ? &eg->norm1_bias : nullptr);
    v.w1 = bind(e.ffn_w1, eg ? &eg->ffn_w1 : nullptr);
    v.b1 = bind(e.ffn_b1, eg ? &eg->ffn_b1 : nullptr);
    v.w2 = bind(e.ffn_w2, eg ? &eg->ffn_w2 : nullptr);
    v.b2 = bind(e.ffn_b2, eg ? &eg->ffn_b2 : nullptr);
    v.n2g = bind(e.norm2_gain, eg ? &eg->norm2_gain : nullptr);
    v.n2b = bind(e.norm2_bias, eg ? &eg->norm2_bias : nullptr);
    enc_.push_back(v);
  }
  for (size_t l = 0; l < p.decoder.size(); ++l) {
    const DecoderLayerParams& d = p.decoder[l];
    DecoderLayerParams* dg = g ? &g->decoder[l] : nullptr;
    DecVars v;
    v.self_attn = bind_mh(d.self_attn, dg ? &dg->self_attn : nullptr);
    v.n1g = bind(d.norm1_gain, dg ? &dg->norm1_gain : nullptr);
    v.n1b = bind(d.norm1_bias, dg ? &dg->norm1_bias : nullptr);
    v.cross_attn = bind_mh(d.cross_attn, dg ? &dg->cross_attn : nullptr);
    v.n2g = bind(d.norm2_gain, dg ? &dg->norm2_gain : nullptr);
    v.n2b = bind(d.norm2_bias, dg ? &dg->norm2_bias : nullptr);
    v.w1 = bind(d.ffn_w1, dg ? &dg->ffn_w1 : nullptr);
    v.b1 = bind(d.ffn_b1, dg ? &dg->ffn_b1 : nullptr);
    v.w2 = bind(d.ffn_w2, dg ? &dg->ffn_w2 : nullptr);
    v.b2 = bind(d.ffn_b2, dg ? &dg->ffn_b2 : nullptr);
    v.n3g = bind(d.norm3_gain, dg ? &dg->norm3_gain : nullptr);
    v.n3b = bind(d.norm3_bias, dg ? &dg->norm3_bias : nullptr);
    dec_.push_back(v);
  }
  if (p.config.mode == Mode::kHierarchical) {
    target_embed_ = bind(p.target_embed, g ? &g->target_embed : nullptr);
  } else {
    cls_w_ = bind(p.cls_hidden_w, g ? &g->cls_hidden_w : nullptr);
    cls_b_ = bind(p.cls_hidden_b, g ? &g->cls_hidden_b : nullptr);
  }
  out_w_ = bind(p.output_proj, g ? &g->output_proj : nullptr);
  out_b_ = bind(p.output_bias, g ? &g->output_bias : nullptr);
}

Var BoundModel::Drop(Var v, const ForwardOptions& opts) {
  if (!opts.train || params_.config.dropout == 0.0) return v;
  if (opts.rng == nullptr) throw UsageError("forward: train mode requires an rng");
  return tape_.Dropout(v, params_.config.dropout, *opts.rng);
}

Var BoundModel::Ffn(Var h, Var w1, Var b1, Var w2, Var b2) {
  Var hidden = tape_.Relu(tape_.AddRow(tape_.MatmulNN(h, w1), b1));
  return tape_.AddRow(tape_.MatmulNN(hidden, w2), b2);
}

Var BoundModel::Embed(const Tensor& features, const ForwardOptions& opts) {
  if (features.Rank() != 2 || features.Cols() != params_.config.input_dim) {
    throw ShapeError(Msg("embed: features ", features.ShapeStr(), " vs input_dim ",
                         params_.config.input_dim));
  }
  const int64_t t = features.Rows();
  if (t > params_.config.max_positions) {
    throw UsageError(Msg("embed: ", t, " frames exceed max_positions ",
                         params_.config.max_positions,
                         "; raise max_positions in the config"));
  }
  Var x = tape_.Constant(features);
  Var projected = tape_.AddRow(tape_.MatmulNT(x, input_proj_), input_bias_);
  Var with_pos = tape_.Add(projected, tape_.SliceRows(pos_table_, 0, t));
  Var out = Drop(with_pos, opts);
  if (opts.trace != nullptr) opts.trace->embedded = tape_.Value(out);
  return out;
}

Var BoundModel::EncoderLayer(Var y, int64_t layer, const ForwardOptions& opts) {
  const EncVars& v = enc_[static_cast<size_t>(layer)];
  EncoderLayerTrace* lt = nullptr;
  if (opts.trace != nullptr) {
    opts.trace->encoder.resize(
        std::max(opts.trace->encoder.size(), static_cast<size_t>(layer) + 1));
    lt = &opts.trace->encoder[static_cast<size_t>(layer)];
  }

  Var z = MultiHead(tape_, y, v.self_attn, std::nullopt, nullptr,
                    lt ? &lt->self_attn : nullptr);
  Var h = tape_.LayerNormRows(tape_.Add(Drop(z, opts), y), v.n1g, v.n1b, kLayerNormEps);
  Var s = Ffn(h, v.w1, v.b1, v.w2, v.b2);
  Var r = tape_.LayerNormRows(tape_.Add(Drop(s, opts), h), v.n2g, v.n2b, kLayerNormEps);
  if (lt != nullptr) {
    lt->z = tape_.Value(z);
    lt->h = tape_.Value(h);
    lt->s = tape_.Value(s);
    lt->r = tape_.Value(r);
  }
  return r;
}

Var BoundModel::Encode(const Tensor& features, const ForwardOptions& opts) {
  Var y = Embed(features, opts);
  for (int64_t l = 0; l < params_.config.enc_layers; ++l) {
    y = EncoderLayer(y, l, opts);
  }
  return y;
}

Var BoundModel::DecoderLayer(Var yd, Var enc_out, int64_t layer, const ForwardOptions& opts) {
  const DecVars& v = dec_[static_cast<size_t>(layer)];
  DecoderLayerTrace* lt = nullptr;
  if (opts.trace != nullptr) {
    opts.trace->decoder.resize(
        std::max(opts.trace->decoder.size(), static_cast<size_t>(layer) + 1));
    lt = &opts.trace->decoder[static_cast<size_t>(layer)];
  }

  const int64_t s_len = tape_.Value(yd).Rows();
  AttentionMask mask = CausalMask(s_len);
  Var z = MultiHead(tape_, yd, v.self_attn, std::nullopt, &mask,
                    lt ? &lt->self_attn : nullptr);
  Var h = tape_.LayerNormRows(tape_.Add(Drop(z, opts), yd), v.n1g, v.n1b, kLayerNormEps);
  Var z2 = MultiHead(tape_, h, v.cross_attn, enc_out, nullptr,
                     lt ? &lt->cross_attn : nullptr);
  Var h2 = tape_.LayerNormRows(tape_.Add(Drop(z2, opts), h), v.n2g, v.n2b, kLayerNormEps);
  Var s = Ffn(h2, v.w1, v.b1, v.w2, v.b2);
  Var r = tape_.LayerNormRows(tape_.Add(Drop(s, opts), h2), v.n3g, v.n3b, kLayerNormEps);
  if (lt != nullptr) {
    lt->z = tape_.Value(z);
    lt->h = tape_.Value(h);
    lt->z2 = tape_.Value(z2);
    lt->h2 = tape_.Value(h2);
    lt->s = tape_.Value(s);
    lt->r = tape_.Value(r);
  }
  return r;
}

Var BoundModel::DecodeLogits(const std::vector<int>& input_tokens, Var enc_out,
                             const ForwardOptions& opts) {
  if (params_.config.mode != Mode::kHierarchical) {
    throw UsageError("decode: model is not in hierarchical mode");
  }
  if (input_tokens.empty()) throw UsageError("decode: empty token prefix");
  const int vocab = params_.config.label_space.VocabSize();
  std::vector<int64_t> ids;
  ids.reserve(input_tokens.size());
  for (int t : input_tokens) {
    if (t < 0 || t >= vocab) {
      throw UsageError(Msg("decode: token ", t, " outside vocabulary of ", vocab));
    }
    ids.push_back(t);
  }
  const int64_t s_len = static_cast<int64_t>(ids.size());
  if (s_len > params_.config.max_positions) {
    throw UsageError(Msg("decode: prefix of ", s_len, " exceeds max_positions"));
  }

  Var emb = tape_.LookupRows(target_embed_, ids);
  Var with_pos = tape_.Add(emb, tape_.SliceRows(pos_table_, 0, s_len));
  Var y = Drop(with_pos, opts);
  if (opts.trace != nullptr) opts.trace->dec_embedded = tape_.Value(y);
  for (int64_t l = 0; l < params_.config.dec_layers; ++l) {
    y = DecoderLayer(y, enc_out, l, opts);
  }
  return tape_.AddRow(tape_.MatmulNN(y, out_w_), out_b_);
}

Var BoundModel::ClassificationLogits(Var enc_out, const ForwardOptions& opts) {
  if (params_.config.mode != Mode::kClassification) {
    throw UsageError("classification head: model is not in classification mode");
  }
  Var pooled = tape_.MeanRows(enc_out);
  Var hidden = tape_.Relu(tape_.AddRow(tape_.MatmulNN(pooled, cls_w_), cls_b_));
  Var dropped = Drop(hidden, opts);
  return tape_.AddRow(tape_.MatmulNN(dropped, out_w_), out_b_);
}

// ---- eval conveniences -------------------------------------------------------------

Tensor EncodeEval(const ModelParams& params, const Tensor& features, ActivationTrace* trace) {
  Tape tape;
  BoundModel bound(tape, params);
  ForwardOptions opts;
  opts.trace = trace;
  return tape.Value(bound.Encode(features, opts));
}

Tensor ClassificationLogitsEval(const ModelParams& params, const Tensor& features,
                                ActivationTrace* trace) {
  Tape tape;
  BoundModel bound(tape, params);
  ForwardOptions opts;
  opts.trace = trace;
  Var enc = bound.Encode(features, opts);
  return tape.Value(bound.ClassificationLogits(enc, opts));
}

Tensor DecodeStepLogits(const ModelParams& params, const Tensor& enc_out,
                        const std::vector<int>& prefix) {
  Tape tape;
  BoundModel bound(tape, params);
  ForwardOptions opts;
  Var logits = bound.DecodeLogits(prefix, tape.Constant(enc_out), opts);
  const Tensor& all = tape.Value(logits);
  Tensor last({1, all.Cols()});
  for (int64_t j = 0; j < all.Cols(); ++j) last.At(0, j) = all.At(all.Rows() - 1, j);
  return last;
}

Tensor DecodeFullLogits(const ModelParams& params, const Tensor& enc_out,
                        const std::vector<int>& input_tokens, ActivationTrace* trace) {
  Tape tape;
  BoundModel bound(tape, params);
  ForwardOptions opts;
  opts.trace = trace;
  Var logits = bound.DecodeLogits(input_tokens, tape.Constant(enc_out), opts);
  return tape.Value(logits);
}

// ---- gradient checking ------------------------------------------------------------------

GradCheckReport ModelGradCheck(const ModelConfig& config, int64_t frames, uint64_t seed) {
  config.Validate();
  ModelParams params = ModelParams::Init(config, seed);
  Rng rng(MixSeed(seed, 0x67636b));
  Tensor features({frames, config.input_dim});
  features.FillUniform(rng, -1.0, 1.0);

  // Teacher sequence for hierarchical mode: sop then one token per field.
  const LabelSpace& space = config.label_space;
  std::vector<int> inputs{LabelSpace::kSop};
  std::vector<int64_t> targets;
  if (config.mode == Mode::kHierarchical) {
    LabelVector lv;
    lv.domain = static_cast<int>(rng.Below(static_cast<uint64_t>(space.NumDomains())));
    lv.intent = static_cast<int>(rng.Below(static_cast<uint64_t>(space.NumIntents())));
    for (int f = 0; f < space.NumSlotFields(); ++f) {
      lv.slots.push_back(static_cast<int>(rng.Below(static_cast<uint64_t>(space.SlotCardinality(f)))));
    }
    std::vector<int> content{space.DomainToken(lv.domain), space.IntentToken(lv.intent)};
    for (int f = 0; f < space.NumSlotFields(); ++f) {
      content.push_back(space.SlotToken(f, lv.slots[static_cast<size_t>(f)]));
    }
    // inputs = [sop, content...]; targets = [content..., eop]
    for (int tok : content) {
      inputs.push_back(tok);
      targets.push_back(tok);
    }
    targets.push_back(LabelSpace::kEop);
  }
  const int64_t cls_target = 0;

  auto loss_value = [&]() {
    Tape tape;
    BoundModel bound(tape, params);
    ForwardOptions opts;
    Var enc = bound.Encode(features, opts);
    Var loss;
    if (config.mode == Mode::kHierarchical) {
      Var logits = bound.DecodeLogits(inputs, enc, opts);
      loss = tape.SmoothedCrossEntropy(logits, targets, config.label_smoothing);
    } else {
      Var logits = bound.ClassificationLogits(enc, opts);
      loss = tape.SmoothedCrossEntropy(logits, {cls_target}, config.label_smoothing);
    }
    return tape.Value(loss).At(0);
  };

  ModelGrads grads = ModelParams::Shaped(config);
  {
    Tape tape;
    BoundModel bound(tape, params, &grads);
    ForwardOptions opts;
    Var enc = bound.Encode(features, opts);
    Var loss;
    if (config.mode == Mode::kHierarchical) {
      Var logits = bound.DecodeLogits(inputs, enc, opts);
      loss = tape.SmoothedCrossEntropy(logits, targets, config.label_smoothing);
    } else {
      Var logits = bound.ClassificationLogits(enc, opts);
      loss = tape.SmoothedCrossEntropy(logits, {cls_target}, config.label_smoothing);
    }
    tape.Backward(loss);
  }

  std::vector<std::pair<std::string, Tensor*>> names;
  params.Visit([&names](const std::string& name, Tensor& t) {
    names.emplace_back(name, &t);
  });
  std::vector<const Tensor*> analytic;
  grads.Visit([&analytic](const std::string&, const Tensor& t) {
    analytic.push_back(&t);
  });

  std::vector<GradCheckItem> items;
  items.reserve(names.size());
  for (size_t i = 0; i < names.size(); ++i) {
    items.push_back({names[i].first, names[i].second, analytic[i]});
  }
  return GradCheck(items, loss_value);
}

// ---- checkpoints ----------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[5] = "SLUM";
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

void SaveCheckpoint(const std::string& path, const ModelParams& params) {
  auto os = binio::OpenOut(path);
  binio::WriteMagic(os, kCheckpointMagic);
  binio::WriteU32(os, kCheckpointVersion);
  binio::WriteString(os, params.config.ToJsonText());
  params.Visit([&os](const std::string& name, const Tensor& t) {
    binio::WriteString(os, name);
    binio::WriteU32(os, static_cast<uint32_t>(t.Rank()));
    for (int64_t a = 0; a < t.Rank(); ++a) {
      binio::WriteU32(os, static_cast<uint32_t>(t.Dim(a)));
    }
    for (int64_t i = 0; i < t.Numel(); ++i) {
      binio::WriteF32(os, static_cast<float>(t.At(i)));
    }
  });
  if (!os) throw DataError(Msg("checkpoint: write failed: ", path));
}

ModelParams LoadCheckpoint(const std::string& path) {
  auto is = binio::OpenIn(path);
  binio::ExpectMagic(is, kCheckpointMagic, path);
  uint32_t version = binio::ReadU32(is);
  if (version != kCheckpointVersion) {
    throw DataError(Msg(path, ": unsupported checkpoint version ", version));
  }
  ModelConfig config = ModelConfig::FromJsonText(binio::ReadString(is));
  ModelParams params = ModelParams::Shaped(config);

  std::map<std::string, Tensor*> by_name;
  params.Visit([&by_name](const std::string& name, Tensor& t) { by_name[name] = &t; });

  size_t loaded = 0;
  while (true) {
    if (is.peek() == std::char_traits<char>::eof()) break;
    std::string name = binio::ReadString(is);
    uint32_t rank = binio::ReadU32(is);
    std::vector<int64_t> dims;
    int64_t numel = 1;
    for (uint32_t a = 0; a < rank; ++a) {
      dims.push_back(binio::ReadU32(is));
      numel *= dims.back();
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw DataError(Msg(path, ": unexpected tensor \"", name, "\""));
    }
    Tensor& t = *it->second;
    if (t.Shape() != dims) {
      throw DataError(Msg(path, ": tensor \"", name, "\" has shape mismatch"));
    }
    for (int64_t i = 0; i < numel; ++i) {
      t.At(i) = static_cast<double>(binio::ReadF32(is));
    }
    ++loaded;
  }
  if (loaded != by_name.size()) {
    throw DataError(Msg(path, ": checkpoint holds ", loaded, " tensors, model needs ",
                        by_name.size()));
  }
  return params;
}

}  // namespace slu
