// tests/test_features.cpp

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "slu/features.hpp"
#include "slu/rng.hpp"
#include "slu/wave.hpp"

using namespace slu;

namespace {

Waveform Sine(double freq_hz, double seconds, double amp = 0.5, int rate = 16000) {
  Waveform w;
  w.sample_rate_hz = rate;
  int64_t n = static_cast<int64_t>(seconds * rate);
  w.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    w.samples[static_cast<size_t>(i)] =
        amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate);
  }
  return w;
}

std::string TempPath(const char* name) {
  return std::string("/tmp/slu_feat_test_") + name;
}

std::vector<char> Slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

// ---- framing ------------------------------------------------------------------

TEST_CASE("frame count formula") {
  // one second at 16 kHz: floor((16000 - 400) / 160) + 1 = 98
  Waveform w = Sine(440.0, 1.0);
  CHECK(w.samples.size() == 16000);
  Tensor frames = FrameAndWindow(w);
  CHECK(frames.Rows() == 98);
  CHECK(frames.Cols() == 400);

  // exactly one window of samples -> exactly one frame
  Waveform one;
  one.samples.assign(400, 0.25);
  Tensor single = FrameAndWindow(one);
  CHECK(single.Rows() == 1);
}

TEST_CASE("constant input reproduces the Hamming window") {
  Waveform one;
  one.samples.assign(400, 1.0);
  Tensor frames = FrameAndWindow(one);
  for (int i = 0; i < 400; ++i) {
    double expect = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / 399.0);
    CHECK(frames.At(0, i) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("too-short waveform is an error") {
  Waveform w;
  w.samples.assign(399, 0.0);
  CHECK_THROWS_AS(FrameAndWindow(w), DataError);
}

// ---- log mel ------------------------------------------------------------------

TEST_CASE("all-zero frames hit the log floor everywhere") {
  Tensor frames({3, 400});
  Tensor mel = LogMelSpectra(frames, 16000);
  for (int64_t i = 0; i < mel.Numel(); ++i) {
    CHECK(mel.At(i) == doctest::Approx(std::log(1e-10)).epsilon(1e-12));
  }
}

TEST_CASE("pure tone concentrates energy near its band") {
  // 1 kHz tone: find the strongest band, check bands two or more away are
  // strictly smaller.
  Waveform w = Sine(1000.0, 0.5);
  Tensor frames = FrameAndWindow(w);
  Tensor mel = LogMelSpectra(frames, 16000);
  int best = 0;
  for (int b = 1; b < 80; ++b) {
    if (mel.At(0, b) > mel.At(0, best)) best = b;
  }
  for (int b = 0; b < 80; ++b) {
    if (std::abs(b - best) >= 2) {
      CHECK(mel.At(0, best) > mel.At(0, b));
    }
  }
}

TEST_CASE("doubling amplitude raises non-floored bands by log 4") {
  Waveform w1 = Sine(700.0, 0.2, 0.25);
  Waveform w2 = Sine(700.0, 0.2, 0.5);
  Tensor m1 = LogMelSpectra(FrameAndWindow(w1), 16000);
  Tensor m2 = LogMelSpectra(FrameAndWindow(w2), 16000);
  const double floor_val = std::log(1e-10);
  int checked = 0;
  for (int64_t i = 0; i < m1.Numel(); ++i) {
    // stay well above the floor so neither side saturates
    if (m1.At(i) > floor_val + 2.0 && m2.At(i) > floor_val + 2.0) {
      CHECK(m2.At(i) - m1.At(i) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

// ---- stacking -----------------------------------------------------------------

TEST_CASE("stack: T=4 gives one row that is the concat of all four") {
  Tensor f({4, 2});
  for (int64_t i = 0; i < 8; ++i) f.At(i) = static_cast<double>(i);
  Tensor s = StackFrames(f);
  CHECK(s.Rows() == 1);
  CHECK(s.Cols() == 8);
  for (int64_t i = 0; i < 8; ++i) CHECK(s.At(0, i) == static_cast<double>(i));
}

TEST_CASE("stack: T=10 gives rows anchored at 0, 3, 6") {
  Tensor f({10, 1});
  for (int64_t i = 0; i < 10; ++i) f.At(i) = static_cast<double>(i);
  Tensor s = StackFrames(f);
  CHECK(s.Rows() == 3);
  for (int64_t r = 0; r < 3; ++r) {
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(s.At(r, c) == static_cast<double>(r * 3 + c));
    }
  }
}

TEST_CASE("stack: distinct markers land exactly where the formula says") {
  Tensor f({12, 1});
  for (int64_t i = 0; i < 12; ++i) f.At(i) = 100.0 + static_cast<double>(i);
  Tensor s = StackFrames(f);
  CHECK(s.Rows() == 3);
  for (int64_t r = 0; r < s.Rows(); ++r) {
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(s.At(r, c) == 100.0 + static_cast<double>(r * 3 + c));
    }
  }
}

TEST_CASE("stack: dimensional contract for every T in [4, 200]") {
  for (int64_t t = 4; t <= 200; ++t) {
    Tensor f({t, 80});
    for (int64_t i = 0; i < f.Numel(); ++i) f.At(i) = static_cast<double>(i % 977);
    Tensor s = StackFrames(f);
    CHECK(s.Rows() == (t - 4) / 3 + 1);
    CHECK(s.Cols() == 320);
    // every output row copies its source rows exactly once
    for (int64_t r = 0; r < s.Rows(); ++r) {
      for (int s_idx = 0; s_idx < 4; ++s_idx) {
        CHECK(std::memcmp(s.RowPtr(r) + s_idx * 80, f.RowPtr(r * 3 + s_idx),
                          80 * sizeof(double)) == 0);
      }
    }
  }
}

TEST_CASE("stack: fewer frames than the stack is an error") {
  Tensor f({3, 80});
  CHECK_THROWS_AS(StackFrames(f), DataError);
}

// ---- cmvn ---------------------------------------------------------------------

TEST_CASE("cmvn: fit then apply centers and scales the pool") {
  Rng rng(5);
  std::vector<FeatureMatrix> feats;
  for (int u = 0; u < 3; ++u) {
    FeatureMatrix f({20 + u, 8});
    f.FillUniform(rng, -3.0, 5.0);
    feats.push_back(std::move(f));
  }
  CmvnStats stats = CmvnFit(feats);
  std::vector<FeatureMatrix> normed;
  for (const auto& f : feats) normed.push_back(CmvnApply(f, stats));

  for (int64_t j = 0; j < 8; ++j) {
    double mean = 0, count = 0;
    for (const auto& f : normed) {
      for (int64_t i = 0; i < f.Rows(); ++i) {
        mean += f.At(i, j);
        count += 1;
      }
    }
    mean /= count;
    CHECK(std::abs(mean) < 1e-9);
    double var = 0;
    for (const auto& f : normed) {
      for (int64_t i = 0; i < f.Rows(); ++i) {
        var += (f.At(i, j) - mean) * (f.At(i, j) - mean);
      }
    }
    var /= count;
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("cmvn: identity stats change nothing") {
  CmvnStats stats;
  stats.mean = Tensor::Zeros({4});
  stats.variance = Tensor::Full({4}, 1.0);
  stats.frame_count = 10;
  FeatureMatrix f = Tensor::FromRows({{1.0, -2.0, 3.0, 0.5}, {0.0, 4.0, -1.0, 2.0}});
  FeatureMatrix out = CmvnApply(f, stats);
  CHECK(out == f);
}

TEST_CASE("cmvn: pooled moments match a hand computation") {
  // two constant matrices: rows of 1s (3 frames) and rows of 5s (1 frame)
  FeatureMatrix a = Tensor::Full({3, 2}, 1.0);
  FeatureMatrix b = Tensor::Full({1, 2}, 5.0);
  std::vector<FeatureMatrix> feats{a, b};
  CmvnStats stats = CmvnFit(feats);
  // mean = (3*1 + 5)/4 = 2; var = (3*(1-2)^2 + (5-2)^2)/4 = 12/4 = 3
  for (int64_t j = 0; j < 2; ++j) {
    CHECK(stats.mean.At(j) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(stats.variance.At(j) == doctest::Approx(3.0).epsilon(1e-15));
  }
}

TEST_CASE("cmvn: apply is invertible given the stats") {
  Rng rng(6);
  FeatureMatrix f({30, 6});
  f.FillUniform(rng, -2.0, 2.0);
  std::vector<FeatureMatrix> feats{f};
  CmvnStats stats = CmvnFit(feats);
  FeatureMatrix normed = CmvnApply(f, stats);
  // invert: x = normed * sqrt(var) + mean
  for (int64_t i = 0; i < f.Rows(); ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      double back = normed.At(i, j) * std::sqrt(stats.variance.At(j)) + stats.mean.At(j);
      CHECK(std::abs(back - f.At(i, j)) < 1e-9);
    }
  }
}

TEST_CASE("cmvn: empty input is an error") {
  std::vector<FeatureMatrix> none;
  CHECK_THROWS_AS(CmvnFit(none), DataError);
  FeatureMatrix single({1, 4});
  std::vector<FeatureMatrix> one{single};
  CHECK_THROWS_AS(CmvnFit(one), DataError);  // fewer than 2 frames
}

// ---- end to end ----------------------------------------------------------------

TEST_CASE("featurize: deterministic and 320-dimensional") {
  Waveform w = Sine(523.0, 0.4);
  FeatureMatrix f1 = Featurize(w);
  FeatureMatrix f2 = Featurize(w);
  CHECK(f1.Cols() == 320);
  CHECK(f1.Rows() > 0);
  CHECK(std::memcmp(f1.Data(), f2.Data(),
                    static_cast<size_t>(f1.Numel()) * sizeof(double)) == 0);
}

TEST_CASE("featurize: wrong sample rate is an error, not a resample") {
  Waveform w = Sine(440.0, 0.5, 0.5, 8000);
  CHECK_THROWS_AS(Featurize(w), DataError);
}

// ---- file formats --------------------------------------------------------------

TEST_CASE("feature store round-trips byte-exactly") {
  Rng rng(9);
  std::vector<std::pair<std::string, FeatureMatrix>> records;
  for (int u = 0; u < 3; ++u) {
    FeatureMatrix f({5 + u, 16});
    f.FillUniform(rng, -4.0, 4.0);
    records.emplace_back(Msg("utt-", u), std::move(f));
  }
  const std::string p1 = TempPath("store1.sluf");
  const std::string p2 = TempPath("store2.sluf");
  WriteFeatureStore(p1, records);
  auto loaded = ReadFeatureStore(p1);
  REQUIRE(loaded.size() == 3);
  for (size_t u = 0; u < 3; ++u) CHECK(loaded[u].first == records[u].first);
  WriteFeatureStore(p2, loaded);
  CHECK(Slurp(p1) == Slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("cmvn stats file round-trips bit-exactly") {
  Rng rng(10);
  CmvnStats stats;
  stats.mean = Tensor({12});
  stats.mean.FillUniform(rng, -1.0, 1.0);
  stats.variance = Tensor({12});
  stats.variance.FillUniform(rng, 0.5, 2.0);
  stats.frame_count = 99;
  const std::string p = TempPath("stats.sluc");
  WriteCmvn(p, stats);
  CmvnStats loaded = ReadCmvn(p);
  CHECK(loaded.mean == stats.mean);
  CHECK(loaded.variance == stats.variance);
  std::remove(p.c_str());
}

TEST_CASE("wav io: quantized waveform round-trips exactly") {
  Waveform w = Sine(660.0, 0.1);
  QuantizeToPcm16(w);
  const std::string p = TempPath("tone.wav");
  WriteWav(p, w);
  Waveform r = ReadWav(p);
  CHECK(r.sample_rate_hz == w.sample_rate_hz);
  REQUIRE(r.samples.size() == w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(r.samples[i] == w.samples[i]);
  }
  std::remove(p.c_str());
}
