// src/decoding.cpp

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

#include "slu/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "slu/common.hpp"

namespace slu {

using nlohmann::json;

namespace {

/// Softmax probability of index `pick` within `logits`.
double PickProbability(const std::vector<double>& logits, size_t pick) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - m);
  return std::exp(logits[pick] - m) / denom;
}

/// Argmax with ties broken toward the lowest id, optionally restricted to
/// [first, last).
size_t ArgmaxInRange(const std::vector<double>& logits, size_t first, size_t last) {
  size_t best = first;
  for (size_t i = first + 1; i < last; ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace

DecodeResult GreedyDecode(const StepFn& step, const LabelSpace& space, bool constrained,
                          int max_content_tokens) {
  const int content_len = space.ContentLength();  // domain + intent + M slots
  const int limit = max_content_tokens > 0 ? max_content_tokens : content_len;
  const size_t vocab = static_cast<size_t>(space.VocabSize());

  DecodeResult result;
  result.label.slots.assign(static_cast<size_t>(space.NumSlotFields()), -1);

  std::vector<int> prefix{LabelSpace::kSop};
  int position = 0;  // content position: 0 domain, 1 intent, 2.. slots
  while (position < limit) {
    std::vector<double> logits = step(prefix);
    if (logits.size() != vocab) {
      throw UsageError(Msg("decode: step produced ", logits.size(), " logits for a vocab of ",
                           vocab));
    }

    size_t pick;
    if (constrained) {
      auto [first, last] = space.FieldTokenRange(position);
      pick = ArgmaxInRange(logits, static_cast<size_t>(first), static_cast<size_t>(last));
    } else {
      pick = ArgmaxInRange(logits, 0, vocab);
    }
    const int token = static_cast<int>(pick);
    result.tokens.push_back(token);
    result.token_posteriors.push_back(PickProbability(logits, pick));

    if (token == LabelSpace::kEop) break;

    LabelSpace::TokenInfo info = space.TokenOf(token);
    bool in_field = (position == 0 && info.field == LabelField::kDomain) ||
                    (position == 1 && info.field == LabelField::kIntent) ||
                    (position >= 2 && info.field == LabelField::kSlot &&
                     info.index == position - 2);
    if (in_field) {
      if (position == 0) {
        result.label.domain = info.value;
      } else if (position == 1) {
        result.label.intent = info.value;
      } else {
        result.label.slots[static_cast<size_t>(position - 2)] = info.value;
      }
    } else {
      // wrong field (or a stray sop): flag once, keep decoding; the fields
      // from here on stay unset and score as wrong
      result.structural_violation = true;
    }

    prefix.push_back(token);
    ++position;
  }

  // stopping early (eop before all fields) leaves fields unset
  if (result.label.domain < 0 || result.label.intent < 0 ||
      std::any_of(result.label.slots.begin(), result.label.slots.end(),
                  [](int s) { return s < 0; })) {
    result.structural_violation = true;
  }
  return result;
}

ClassifyResult Classify(const ModelParams& params, const Tensor& features) {
  if (params.config.mode != Mode::kClassification) {
    throw UsageError("classify: model is not in classification mode");
  }
  Tensor logits = ClassificationLogitsEval(params, features);
  Tape tape;
  Tensor posterior = tape.Value(tape.SoftmaxRows(tape.Constant(logits)));

  ClassifyResult result;
  int64_t best = 0;
  for (int64_t j = 1; j < logits.Cols(); ++j) {
    if (logits.At(0, j) > logits.At(0, best)) best = j;  // ties keep the lowest id
  }
  result.class_id = best;
  result.posterior = posterior.At(0, best);
  result.label = params.config.label_space.ClassToLabel(best);
  result.distribution = std::move(posterior);
  return result;
}

DecodeResult HierarchicalDecode(const ModelParams& params, const Tensor& features,
                                bool constrained, int max_content_tokens) {
  if (params.config.mode != Mode::kHierarchical) {
    throw UsageError("hierarchical decode: model is not in hierarchical mode");
  }
  Tensor enc_out = EncodeEval(params, features);
  StepFn step = [&params, &enc_out](const std::vector<int>& prefix) {
    Tensor logits = DecodeStepLogits(params, enc_out, prefix);
    std::vector<double> row(static_cast<size_t>(logits.Cols()));
    for (int64_t j = 0; j < logits.Cols(); ++j) row[static_cast<size_t>(j)] = logits.At(0, j);
    return row;
  };
  return GreedyDecode(step, params.config.label_space, constrained, max_content_tokens);
}

std::string PredictionToJsonLine(const Prediction& p, const LabelSpace& space) {
  json j;
  j["id"] = p.id;
  j["mode"] = ModeName(p.mode);
  j["domain"] = p.label.domain >= 0 ? space.Domains()[static_cast<size_t>(p.label.domain)]
                                    : std::string();
  j["intent"] = p.label.intent >= 0 ? space.Intents()[static_cast<size_t>(p.label.intent)]
                                    : std::string();
  json slots = json::array();
  for (int f = 0; f < space.NumSlotFields(); ++f) {
    int v = f < static_cast<int>(p.label.slots.size()) ? p.label.slots[static_cast<size_t>(f)] : -1;
    slots.push_back(v >= 0 ? space.SlotValues(f)[static_cast<size_t>(v)] : std::string());
  }
  j["slots"] = slots;
  if (p.mode == Mode::kHierarchical) {
    j["posterior"] = p.token_posteriors;
  } else {
    j["posterior"] = p.class_posterior;
  }
  j["structural_violation"] = p.structural_violation;
  return j.dump();
}

Prediction PredictionFromJsonLine(const std::string& line, const LabelSpace& space) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(Msg("prediction: bad json line: ", e.what()));
  }
  Prediction p;
  p.id = j.at("id").get<std::string>();
  p.mode = ModeFromName(j.at("mode").get<std::string>());
  const std::string domain = j.at("domain").get<std::string>();
  const std::string intent = j.at("intent").get<std::string>();
  p.label.domain = domain.empty() ? -1 : space.DomainId(domain);
  p.label.intent = intent.empty() ? -1 : space.IntentId(intent);
  if (!domain.empty() && p.label.domain < 0) {
    throw DataError(Msg("prediction: unknown domain \"", domain, "\""));
  }
  if (!intent.empty() && p.label.intent < 0) {
    throw DataError(Msg("prediction: unknown intent \"", intent, "\""));
  }
  const auto slots = j.at("slots").get<std::vector<std::string>>();
  if (static_cast<int>(slots.size()) != space.NumSlotFields()) {
    throw DataError("prediction: slot count does not match the label space");
  }
  for (int f = 0; f < space.NumSlotFields(); ++f) {
    const std::string& name = slots[static_cast<size_t>(f)];
    int id = name.empty() ? -1 : space.SlotId(f, name);
    if (!name.empty() && id < 0) {
      throw DataError(Msg("prediction: unknown slot value \"", name, "\""));
    }
    p.label.slots.push_back(id);
  }
  if (p.mode == Mode::kHierarchical) {
    p.token_posteriors = j.at("posterior").get<std::vector<double>>();
  } else {
    p.class_posterior = j.at("posterior").get<double>();
  }
  p.structural_violation = j.at("structural_violation").get<bool>();
  return p;
}

}  // namespace slu
