// slu/training.hpp

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

// Loss, optimizer, learning-rate schedule, and the epoch loop.
//
// Determinism contract: a fixed TrainConfig (seed and thread count
// included) reproduces the parameter trajectory and the metrics CSV
// byte for byte. Batch members are processed as independent graphs;
// worker threads own fixed index blocks and their gradient accumulators
// are merged in worker order, so the schedule never affects results.

#ifndef SLU_TRAINING_HPP_
#define SLU_TRAINING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "slu/decoding.hpp"
#include "slu/model.hpp"

namespace slu {

// ---- learning-rate schedule ------------------------------------------------------

struct ScheduleConfig {
  double factor = 0.95;    // k
  int64_t warmup = 18000;  // w
  int64_t model_dim = 128;
};

/// lr = k * d^-0.5 * min(step^-0.5, step * w^-1.5); linear up to the
/// warmup step, then per-step decay. step starts at 1.
double LrAt(int64_t step, const ScheduleConfig& sched);

// ---- optimizer -----------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

struct TrainState {
  int64_t step = 0;
  ModelGrads m;  // first moments, parameter-shaped
  ModelGrads v;  // second moments
  uint64_t seed = 0;
  double best_exact = -1.0;
  std::string best_checkpoint;

  static TrainState ForModel(const ModelConfig& config, uint64_t seed);
};

/// One optimizer step with bias correction. state.step must already count
/// this update (call Advance first).
void AdamStep(ModelParams& params, const ModelGrads& grads, TrainState& state,
              const AdamConfig& adam, double lr);

/// Global-norm gradient clipping; returns the pre-clip norm.
double ClipGradients(ModelGrads& grads, double max_norm);

// ---- losses ---------------------------------------------------------------------------

/// Label-smoothed cross entropy of one logits row against a target id:
/// q_target = 1 - eps + eps/C, q_other = eps/C.
double SmoothedCrossEntropyValue(const Tensor& logits, int64_t target, double smoothing);

struct TeacherSequence {
  std::vector<int> inputs;       // [sop, domain, intent, slots...]
  std::vector<int64_t> targets;  // [domain, intent, slots..., eop]
};
TeacherSequence BuildTeacherSequence(const LabelSpace& space, const LabelVector& label);

/// Per-utterance training loss on the tape: classification-head cross
/// entropy or the mean over teacher-forced sequence positions, by mode.
Var UtteranceLoss(Tape& tape, BoundModel& bound, const Tensor& features,
                  const LabelVector& label, const ModelConfig& config,
                  const ForwardOptions& opts);

// ---- the epoch loop ---------------------------------------------------------------------

struct Utterance {
  std::string id;
  Tensor features;
  LabelVector label;
};

struct Dataset {
  std::vector<Utterance> items;
};

struct TrainConfig {
  int64_t epochs = 50;
  int64_t batch_size = 32;
  ScheduleConfig schedule;  // model_dim is synced from the model config
  AdamConfig adam;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  int threads = 0;  // 0 = min(4, hardware)

  static TrainConfig FromJsonText(const std::string& text);
  std::string ToJsonText() const;
};

struct EpochMetrics {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double domain_acc = 0.0;
  double intent_acc = 0.0;
  double slot_acc = 1.0;  // macro over slot fields; 1.0 when there are none
  double exact_match = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> curve;
  std::string best_checkpoint;
  std::string final_checkpoint;
  std::string metrics_csv;
};

/// Trains from scratch, evaluating once per epoch and keeping the
/// checkpoint with the best eval exact match. Writes metrics.csv,
/// best.slum, and final.slum under out_dir. A non-finite loss aborts with
/// a NumericError naming the step.
TrainResult Train(const Dataset& train_set, const Dataset& eval_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::string& out_dir);

/// Greedy-decodes the set and reports the per-field metrics used for the
/// per-epoch rows (unconstrained decoding in hierarchical mode).
EpochMetrics EvaluateOnDataset(const ModelParams& params, const Dataset& dataset);

void WriteMetricsCsv(const std::string& path, const std::vector<EpochMetrics>& curve);
std::vector<EpochMetrics> ReadMetricsCsv(const std::string& path);

}  // namespace slu

#endif  // SLU_TRAINING_HPP_
