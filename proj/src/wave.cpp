// src/wave.cpp

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

#include "slu/wave.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "slu/binio.hpp"
#include "slu/common.hpp"

namespace slu {

namespace {
constexpr double kPcmScale = 32768.0;

void WriteU16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

uint16_t ReadU16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw DataError("wav: truncated header");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

int16_t QuantizeSample(double x) {
  double clipped = std::clamp(x, -1.0, 1.0);
  double scaled = std::round(clipped * kPcmScale);
  scaled = std::clamp(scaled, -32768.0, 32767.0);
  return static_cast<int16_t>(scaled);
}
}  // namespace

Waveform ReadWav(const std::string& path) {
  auto is = binio::OpenIn(path);
  binio::ExpectMagic(is, "RIFF", path);
  binio::ReadU32(is);  // chunk size
  binio::ExpectMagic(is, "WAVE", path);

  Waveform w;
  bool have_fmt = false;
  while (is) {
    char id[4];
    is.read(id, 4);
    if (!is) break;
    uint32_t size = binio::ReadU32(is);
    std::string chunk(id, 4);
    if (chunk == "fmt ") {
      uint16_t format = ReadU16(is);
      uint16_t channels = ReadU16(is);
      uint32_t rate = binio::ReadU32(is);
      binio::ReadU32(is);  // byte rate
      ReadU16(is);         // block align
      uint16_t bits = ReadU16(is);
      if (format != 1) throw DataError(Msg(path, ": only PCM wav supported"));
      if (channels != 1) throw DataError(Msg(path, ": only mono wav supported, got ", channels, " channels"));
      if (bits != 16) throw DataError(Msg(path, ": only 16-bit wav supported, got ", bits));
      w.sample_rate_hz = static_cast<int>(rate);
      if (size > 16) is.ignore(size - 16);
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw DataError(Msg(path, ": data chunk before fmt"));
      uint32_t count = size / 2;
      w.samples.resize(count);
      for (uint32_t i = 0; i < count; ++i) {
        int16_t s = static_cast<int16_t>(ReadU16(is));
        w.samples[i] = static_cast<double>(s) / kPcmScale;
      }
      return w;
    } else {
      is.ignore(size + (size & 1));
    }
  }
  throw DataError(Msg(path, ": no data chunk found"));
}

void WriteWav(const std::string& path, const Waveform& w) {
  auto os = binio::OpenOut(path);
  uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  binio::WriteU32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::WriteU32(os, 16);
  WriteU16(os, 1);  // PCM
  WriteU16(os, 1);  // mono
  binio::WriteU32(os, static_cast<uint32_t>(w.sample_rate_hz));
  binio::WriteU32(os, static_cast<uint32_t>(w.sample_rate_hz * 2));
  WriteU16(os, 2);   // block align
  WriteU16(os, 16);  // bits
  os.write("data", 4);
  binio::WriteU32(os, data_bytes);
  for (double x : w.samples) {
    WriteU16(os, static_cast<uint16_t>(QuantizeSample(x)));
  }
  if (!os) throw DataError(Msg("wav: write failed: ", path));
}

void QuantizeToPcm16(Waveform& w) {
  for (double& x : w.samples) {
    x = static_cast<double>(QuantizeSample(x)) / kPcmScale;
  }
}

}  // namespace slu
