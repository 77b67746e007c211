// slu/decoding.hpp

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

// The two inference regimes. Classification: one softmax over every
// (domain, intent, slots) combination, argmax with ties broken toward the
// lowest class id. Hierarchical: greedy token-by-token decoding starting
// from the start marker, stopping at the end marker or once every field
// has a token. Tokens landing outside the field expected at their
// position set a structural-violation flag (the affected fields score as
// wrong); the constrained variant instead restricts each argmax to the
// expected field's token range, so its output is always well-formed.

#ifndef SLU_DECODING_HPP_
#define SLU_DECODING_HPP_

#include <functional>
#include <string>
#include <vector>

#include "slu/labels.hpp"
#include "slu/model.hpp"
#include "slu/tensor.hpp"

namespace slu {

struct DecodeResult {
  LabelVector label;                    // -1 fields were never decoded validly
  std::vector<int> tokens;              // decoded tokens, eop included if emitted
  std::vector<double> token_posteriors; // softmax probability of each decoded token
  bool structural_violation = false;
};

struct ClassifyResult {
  LabelVector label;
  int64_t class_id = -1;
  double posterior = 0.0;               // probability of the argmax class
  Tensor distribution;                  // full class posterior (1 x C)
};

/// Next-token logits for a prefix that starts with sop.
using StepFn = std::function<std::vector<double>(const std::vector<int>& prefix)>;

/// Greedy loop over an arbitrary step function (the seam the model-backed
/// decoders and the tests share).
DecodeResult GreedyDecode(const StepFn& step, const LabelSpace& space,
                          bool constrained = false, int max_content_tokens = -1);

ClassifyResult Classify(const ModelParams& params, const Tensor& features);

DecodeResult HierarchicalDecode(const ModelParams& params, const Tensor& features,
                                bool constrained = false, int max_content_tokens = -1);

/// One utterance's decoded output in the JSON-lines schema.
struct Prediction {
  std::string id;
  Mode mode = Mode::kClassification;
  LabelVector label;
  std::vector<double> token_posteriors;  // hierarchical: per decoded token
  double class_posterior = 0.0;          // classification: argmax probability
  bool structural_violation = false;
};

std::string PredictionToJsonLine(const Prediction& p, const LabelSpace& space);
Prediction PredictionFromJsonLine(const std::string& line, const LabelSpace& space);

}  // namespace slu

#endif  // SLU_DECODING_HPP_
