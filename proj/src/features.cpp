// src/features.cpp

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

#include "slu/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "slu/binio.hpp"
#include "slu/common.hpp"

namespace slu {

namespace {

constexpr double kLogFloorValue = 1e-10;

int NextPow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 FFT over complex doubles.
void Fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank over power-spectrum bins, precomputed as
/// (first_bin, weights) pairs per band.
class MelFilterbank {
 public:
  MelFilterbank(int num_bands, int nfft, int sample_rate_hz, double fmin_hz) {
    const int num_bins = nfft / 2 + 1;
    const double bin_width = static_cast<double>(sample_rate_hz) / nfft;
    const double mel_lo = HzToMel(fmin_hz);
    const double mel_hi = HzToMel(sample_rate_hz / 2.0);
    const double mel_step = (mel_hi - mel_lo) / (num_bands + 1);
    bands_.resize(static_cast<size_t>(num_bands));
    for (int b = 0; b < num_bands; ++b) {
      const double left = mel_lo + b * mel_step;
      const double center = left + mel_step;
      const double right = center + mel_step;
      Band& band = bands_[static_cast<size_t>(b)];
      band.first_bin = -1;
      for (int i = 0; i < num_bins; ++i) {
        double mel = HzToMel(bin_width * i);
        if (mel <= left || mel >= right) continue;
        double w = mel <= center ? (mel - left) / (center - left)
                                 : (right - mel) / (right - center);
        if (band.first_bin < 0) band.first_bin = i;
        band.weights.push_back(w);
      }
      band.center_hz = MelToHz(center);
    }
  }

  int NumBands() const { return static_cast<int>(bands_.size()); }

  double Apply(int band, const std::vector<double>& power) const {
    const Band& b = bands_[static_cast<size_t>(band)];
    double acc = 0.0;
    for (size_t i = 0; i < b.weights.size(); ++i) {
      acc += b.weights[i] * power[static_cast<size_t>(b.first_bin) + i];
    }
    return acc;
  }

 private:
  struct Band {
    int first_bin = -1;
    std::vector<double> weights;
    double center_hz = 0.0;
  };
  std::vector<Band> bands_;
};

}  // namespace

Tensor FrameAndWindow(const Waveform& w, double window_ms, double hop_ms) {
  const int win = static_cast<int>(std::lround(window_ms * w.sample_rate_hz / 1000.0));
  const int hop = static_cast<int>(std::lround(hop_ms * w.sample_rate_hz / 1000.0));
  if (win < 2 || hop < 1) {
    throw UsageError(Msg("frame: degenerate window/hop ", win, "/", hop));
  }
  const int64_t n = static_cast<int64_t>(w.samples.size());
  if (n < win) {
    throw DataError(Msg("frame: waveform of ", n, " samples shorter than one window (",
                        win, ")"));
  }
  const int64_t num_frames = (n - win) / hop + 1;

  std::vector<double> hamming(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i) {
    hamming[static_cast<size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));
  }

  Tensor frames({num_frames, win});
  for (int64_t f = 0; f < num_frames; ++f) {
    const double* src = w.samples.data() + f * hop;
    double* dst = frames.RowPtr(f);
    for (int i = 0; i < win; ++i) dst[i] = src[i] * hamming[static_cast<size_t>(i)];
  }
  return frames;
}

Tensor LogMelSpectra(const Tensor& frames, int sample_rate_hz, int num_bands,
                     double fmin_hz) {
  const int win = static_cast<int>(frames.Cols());
  const int nfft = NextPow2(win);
  const int num_bins = nfft / 2 + 1;
  MelFilterbank bank(num_bands, nfft, sample_rate_hz, fmin_hz);

  Tensor out({frames.Rows(), num_bands});
  std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
  std::vector<double> power(static_cast<size_t>(num_bins));
  const double log_floor = std::log(kLogFloorValue);

  for (int64_t f = 0; f < frames.Rows(); ++f) {
    const double* src = frames.RowPtr(f);
    for (int i = 0; i < win; ++i) buf[static_cast<size_t>(i)] = {src[i], 0.0};
    for (int i = win; i < nfft; ++i) buf[static_cast<size_t>(i)] = {0.0, 0.0};
    Fft(buf);
    for (int i = 0; i < num_bins; ++i) {
      power[static_cast<size_t>(i)] = std::norm(buf[static_cast<size_t>(i)]);
    }
    double* dst = out.RowPtr(f);
    for (int b = 0; b < num_bands; ++b) {
      double e = bank.Apply(b, power);
      dst[b] = e > kLogFloorValue ? std::log(e) : log_floor;
    }
  }
  return out;
}

Tensor StackFrames(const Tensor& feats, int stack, int skip) {
  if (stack < 1 || skip < 1) {
    throw UsageError(Msg("stack: degenerate stack/skip ", stack, "/", skip));
  }
  const int64_t t = feats.Rows();
  if (t < stack) {
    throw DataError(Msg("stack: ", t, " frames is fewer than the stack size ", stack));
  }
  const int64_t dim = feats.Cols();
  const int64_t out_t = (t - stack) / skip + 1;
  Tensor out({out_t, dim * stack});
  for (int64_t i = 0; i < out_t; ++i) {
    double* dst = out.RowPtr(i);
    for (int s = 0; s < stack; ++s) {
      const double* src = feats.RowPtr(i * skip + s);
      std::copy(src, src + dim, dst + s * dim);
    }
  }
  return out;
}

CmvnStats CmvnFit(std::span<const FeatureMatrix> features) {
  if (features.empty()) throw DataError("cmvn: no feature matrices to fit");
  const int64_t dim = features[0].Cols();
  int64_t frames = 0;
  for (const FeatureMatrix& f : features) {
    if (f.Cols() != dim) {
      throw ShapeError(Msg("cmvn: mixed dims ", f.ShapeStr(), " vs [*x", dim, "]"));
    }
    frames += f.Rows();
  }
  if (frames < 2) throw DataError("cmvn: need at least 2 frames to fit");

  CmvnStats stats;
  stats.mean = Tensor({dim});
  stats.variance = Tensor({dim});
  stats.frame_count = frames;

  // Deterministic two-pass: pooled mean, then pooled squared deviation.
  for (const FeatureMatrix& f : features) {
    for (int64_t i = 0; i < f.Rows(); ++i) {
      const double* row = f.RowPtr(i);
      for (int64_t j = 0; j < dim; ++j) stats.mean.At(j) += row[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(frames);
  for (int64_t j = 0; j < dim; ++j) stats.mean.At(j) *= inv;

  for (const FeatureMatrix& f : features) {
    for (int64_t i = 0; i < f.Rows(); ++i) {
      const double* row = f.RowPtr(i);
      for (int64_t j = 0; j < dim; ++j) {
        double c = row[j] - stats.mean.At(j);
        stats.variance.At(j) += c * c;
      }
    }
  }
  for (int64_t j = 0; j < dim; ++j) {
    stats.variance.At(j) = std::max(stats.variance.At(j) * inv, 1e-10);
  }
  return stats;
}

FeatureMatrix CmvnApply(const FeatureMatrix& x, const CmvnStats& stats) {
  if (x.Cols() != stats.mean.Dim(0)) {
    throw ShapeError(Msg("cmvn: features ", x.ShapeStr(), " vs stats dim ",
                         stats.mean.Dim(0)));
  }
  const int64_t dim = x.Cols();
  std::vector<double> inv_std(static_cast<size_t>(dim));
  for (int64_t j = 0; j < dim; ++j) {
    inv_std[static_cast<size_t>(j)] = 1.0 / std::sqrt(std::max(stats.variance.At(j), 1e-10));
  }
  FeatureMatrix out(x.Shape());
  for (int64_t i = 0; i < x.Rows(); ++i) {
    const double* src = x.RowPtr(i);
    double* dst = out.RowPtr(i);
    for (int64_t j = 0; j < dim; ++j) {
      dst[j] = (src[j] - stats.mean.At(j)) * inv_std[static_cast<size_t>(j)];
    }
  }
  return out;
}

FeatureMatrix Featurize(const Waveform& w, const FeatureConfig& cfg) {
  if (w.sample_rate_hz != cfg.sample_rate_hz) {
    throw DataError(Msg("featurize: sample rate ", w.sample_rate_hz,
                        " != configured ", cfg.sample_rate_hz,
                        " (resampling not supported)"));
  }
  Tensor frames = FrameAndWindow(w, cfg.window_ms, cfg.hop_ms);
  Tensor mel = LogMelSpectra(frames, cfg.sample_rate_hz, cfg.num_bands, cfg.fmin_hz);
  Tensor stacked = StackFrames(mel, cfg.stack, cfg.skip);
  stacked.CheckFinite("featurize");
  return stacked;
}

// ---- On-disk formats ----------------------------------------------------------

namespace {
constexpr char kFeatureMagic[5] = "SLUF";
constexpr char kCmvnMagic[5] = "SLUC";
constexpr uint32_t kFeatureVersion = 1;
}  // namespace

void WriteFeatureStore(const std::string& path,
                       std::span<const std::pair<std::string, FeatureMatrix>> records) {
  auto os = binio::OpenOut(path);
  binio::WriteMagic(os, kFeatureMagic);
  binio::WriteU32(os, kFeatureVersion);
  binio::WriteU32(os, static_cast<uint32_t>(records.size()));
  for (const auto& [id, feats] : records) {
    binio::WriteString(os, id);
    binio::WriteU32(os, static_cast<uint32_t>(feats.Rows()));
    binio::WriteU32(os, static_cast<uint32_t>(feats.Cols()));
    for (int64_t i = 0; i < feats.Numel(); ++i) {
      binio::WriteF32(os, static_cast<float>(feats.At(i)));
    }
  }
  if (!os) throw DataError(Msg("feature store: write failed: ", path));
}

std::vector<std::pair<std::string, FeatureMatrix>> ReadFeatureStore(const std::string& path) {
  auto is = binio::OpenIn(path);
  binio::ExpectMagic(is, kFeatureMagic, path);
  uint32_t version = binio::ReadU32(is);
  if (version != kFeatureVersion) {
    throw DataError(Msg(path, ": unsupported feature store version ", version));
  }
  uint32_t count = binio::ReadU32(is);
  std::vector<std::pair<std::string, FeatureMatrix>> records;
  records.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    std::string id = binio::ReadString(is);
    int64_t rows = binio::ReadU32(is);
    int64_t cols = binio::ReadU32(is);
    FeatureMatrix feats({rows, cols});
    for (int64_t i = 0; i < feats.Numel(); ++i) {
      feats.At(i) = static_cast<double>(binio::ReadF32(is));
    }
    records.emplace_back(std::move(id), std::move(feats));
  }
  return records;
}

void WriteCmvn(const std::string& path, const CmvnStats& stats) {
  auto os = binio::OpenOut(path);
  binio::WriteMagic(os, kCmvnMagic);
  binio::WriteU32(os, static_cast<uint32_t>(stats.mean.Dim(0)));
  for (int64_t j = 0; j < stats.mean.Numel(); ++j) binio::WriteF64(os, stats.mean.At(j));
  for (int64_t j = 0; j < stats.variance.Numel(); ++j) binio::WriteF64(os, stats.variance.At(j));
  if (!os) throw DataError(Msg("cmvn: write failed: ", path));
}

CmvnStats ReadCmvn(const std::string& path) {
  auto is = binio::OpenIn(path);
  binio::ExpectMagic(is, kCmvnMagic, path);
  int64_t dim = binio::ReadU32(is);
  CmvnStats stats;
  stats.mean = Tensor({dim});
  stats.variance = Tensor({dim});
  for (int64_t j = 0; j < dim; ++j) stats.mean.At(j) = binio::ReadF64(is);
  for (int64_t j = 0; j < dim; ++j) stats.variance.At(j) = binio::ReadF64(is);
  return stats;
}

}  // namespace slu
