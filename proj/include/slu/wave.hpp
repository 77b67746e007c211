// slu/wave.hpp

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

#ifndef SLU_WAVE_HPP_
#define SLU_WAVE_HPP_

#include <string>
#include <vector>

namespace slu {

/// Mono audio in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;
};

/// Reads a 16-bit PCM mono WAV file. Anything else (stereo, other sample
/// formats) is a DataError; resampling is out of scope, so an unexpected
/// rate is rejected by callers that care.
Waveform ReadWav(const std::string& path);

/// Writes 16-bit PCM mono. Samples are clipped to [-1, 1] and quantized.
void WriteWav(const std::string& path, const Waveform& w);

/// Quantizes samples onto the 16-bit grid in place — the value round trip
/// WriteWav followed by ReadWav then becomes exact.
void QuantizeToPcm16(Waveform& w);

}  // namespace slu

#endif  // SLU_WAVE_HPP_
