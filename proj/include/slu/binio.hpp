// slu/binio.hpp

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

// Little-endian binary file helpers shared by the feature store, CMVN
// stats, and checkpoint formats. All multi-byte fields are LE on disk.

#ifndef SLU_BINIO_HPP_
#define SLU_BINIO_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "slu/common.hpp"

namespace slu::binio {

inline void WriteU32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t ReadU32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("binio: truncated file while reading u32");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void WriteF32(std::ostream& os, float v) {
  static_assert(sizeof(float) == 4);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  WriteU32(os, bits);
}

inline float ReadF32(std::istream& is) {
  uint32_t bits = ReadU32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void WriteF64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  WriteU32(os, static_cast<uint32_t>(bits & 0xffffffffULL));
  WriteU32(os, static_cast<uint32_t>(bits >> 32));
}

inline double ReadF64(std::istream& is) {
  uint64_t lo = ReadU32(is);
  uint64_t hi = ReadU32(is);
  uint64_t bits = lo | (hi << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void WriteString(std::ostream& os, const std::string& s) {
  WriteU32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadString(std::istream& is) {
  uint32_t n = ReadU32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("binio: truncated file while reading string");
  return s;
}

inline void WriteMagic(std::ostream& os, const char magic[5]) {
  os.write(magic, 4);
}

inline void ExpectMagic(std::istream& is, const char magic[5], const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) {
    throw DataError(Msg(what, ": bad magic, expected \"", magic, "\""));
  }
}

inline std::ofstream OpenOut(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(Msg("cannot open for writing: ", path));
  return os;
}

inline std::ifstream OpenIn(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(Msg("cannot open for reading: ", path));
  return is;
}

}  // namespace slu::binio

#endif  // SLU_BINIO_HPP_
