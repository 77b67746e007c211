// slu/common.hpp

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

#ifndef SLU_COMMON_HPP_
#define SLU_COMMON_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace slu {

/// Base error type. The CLI maps subclasses to exit codes:
/// UsageError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command line or bad API call (wrong mode, invalid argument).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, manifests, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor dimension mismatch. Messages name both offending shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required (NaN/Inf states).
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void MsgAppend(std::ostringstream&) {}
template <typename T, typename... Rest>
void MsgAppend(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  MsgAppend(os, rest...);
}
}  // namespace detail

/// Concatenates the streamable arguments into one message string.
template <typename... Args>
std::string Msg(const Args&... args) {
  std::ostringstream os;
  detail::MsgAppend(os, args...);
  return os.str();
}

#define SLU_CHECK(cond, ...)                        \
  do {                                              \
    if (!(cond)) throw ::slu::Error(::slu::Msg("check failed: " #cond " ", __VA_ARGS__)); \
  } while (0)

}  // namespace slu

#endif  // SLU_COMMON_HPP_
