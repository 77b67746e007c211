// slu/features.hpp

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

// Waveform -> stacked normalized log-mel features.
//
// Pipeline: 25 ms Hamming windows at a 10 ms hop, power spectrum over a
// zero-padded radix-2 FFT, 80 triangular mel bands (HTK scale, 20 Hz to
// Nyquist), natural log floored at log(1e-10), then a stack of 4
// consecutive frames emitted every 3 input frames (320-dim rows). Global
// mean/variance stats are fitted on the training split only.

#ifndef SLU_FEATURES_HPP_
#define SLU_FEATURES_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slu/tensor.hpp"
#include "slu/wave.hpp"

namespace slu {

/// Feature rows for one utterance: T x p, row-major (p = 80 before
/// stacking, 320 after).
using FeatureMatrix = Tensor;

struct FeatureConfig {
  int sample_rate_hz = 16000;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int num_bands = 80;
  double fmin_hz = 20.0;   // filterbank lower edge; upper edge is Nyquist
  int stack = 4;
  int skip = 3;
};

/// Splits into overlapping frames and applies a Hamming window.
/// Frame count is floor((N - win) / hop) + 1; shorter input is an error.
Tensor FrameAndWindow(const Waveform& w, double window_ms = 25.0, double hop_ms = 10.0);

/// Windowed frames -> log mel energies, one row per frame.
Tensor LogMelSpectra(const Tensor& frames, int sample_rate_hz, int num_bands = 80,
                     double fmin_hz = 20.0);

/// Stacks `stack` consecutive rows with an output hop of `skip` rows:
/// out row i = concat(f[i*skip] .. f[i*skip+stack-1]).
Tensor StackFrames(const Tensor& feats, int stack = 4, int skip = 3);

/// Per-dimension pooled moments over a feature set.
struct CmvnStats {
  Tensor mean;      // [dim]
  Tensor variance;  // [dim], floored at 1e-10 before use
  int64_t frame_count = 0;
};

CmvnStats CmvnFit(std::span<const FeatureMatrix> features);
FeatureMatrix CmvnApply(const FeatureMatrix& x, const CmvnStats& stats);

/// Full pipeline minus normalization.
FeatureMatrix Featurize(const Waveform& w, const FeatureConfig& cfg = {});

// ---- On-disk formats ----------------------------------------------------------

/// Feature store: magic "SLUF", version u32, then per-utterance records
/// (id string, T' u32, dim u32, row-major f32 LE).
void WriteFeatureStore(const std::string& path,
                       std::span<const std::pair<std::string, FeatureMatrix>> records);
std::vector<std::pair<std::string, FeatureMatrix>> ReadFeatureStore(const std::string& path);

/// CMVN stats: magic "SLUC", dim u32, mean then variance as f64 LE.
void WriteCmvn(const std::string& path, const CmvnStats& stats);
CmvnStats ReadCmvn(const std::string& path);

}  // namespace slu

#endif  // SLU_FEATURES_HPP_
