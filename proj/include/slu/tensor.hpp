// slu/tensor.hpp

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

#ifndef SLU_TENSOR_HPP_
#define SLU_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "slu/common.hpp"
#include "slu/rng.hpp"

namespace slu {

/// Dense row-major tensor of 64-bit floats. Values are immutable by
/// convention once an op has produced them; mutation is reserved for
/// construction, optimizer updates, and gradient accumulation. Compute is
/// always f64 — 32-bit enters only as an on-disk storage encoding.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);

  static Tensor Zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor Full(std::vector<int64_t> shape, double value);
  /// Row-major data; product(shape) must equal data.size().
  static Tensor From(std::vector<int64_t> shape, std::vector<double> data);
  /// 2-D convenience: rows given as nested initializer lists.
  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);

  int64_t Rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t Dim(int64_t axis) const;
  int64_t Numel() const { return static_cast<int64_t>(data_.size()); }
  const std::vector<int64_t>& Shape() const { return shape_; }
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string ShapeStr() const;

  /// Rank-2 accessors (checked).
  int64_t Rows() const;
  int64_t Cols() const;

  double* Data() { return data_.data(); }
  const double* Data() const { return data_.data(); }

  double& At(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double At(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& At(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * Cols() + c)]; }
  double At(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * Cols() + c)]; }

  const double* RowPtr(int64_t r) const { return Data() + r * Cols(); }
  double* RowPtr(int64_t r) { return Data() + r * Cols(); }

  void Fill(double v);
  void FillUniform(Rng& rng, double lo, double hi);

  bool AllFinite() const;
  /// Throws NumericError naming `what` if any value is NaN or Inf.
  void CheckFinite(const std::string& what) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

/// Throws ShapeError unless both tensors are rank-2 and a.Cols()==b.Rows().
void CheckMatmulNN(const Tensor& a, const Tensor& b);

}  // namespace slu

#endif  // SLU_TENSOR_HPP_
