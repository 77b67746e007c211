// src/tensor.cpp

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

#include "slu/tensor.hpp"

#include <cmath>

namespace slu {

namespace {
int64_t Product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError(Msg("negative dimension ", d));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(Product(shape_)), 0.0);
}

Tensor Tensor::Full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.Fill(value);
  return t;
}

Tensor Tensor::From(std::vector<int64_t> shape, std::vector<double> data) {
  if (Product(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError(Msg("data size ", data.size(), " does not match shape product ",
                         Product(shape)));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::FromRows(std::initializer_list<std::initializer_list<double>> rows) {
  int64_t r = static_cast<int64_t>(rows.size());
  int64_t c = r == 0 ? 0 : static_cast<int64_t>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(static_cast<size_t>(r * c));
  for (const auto& row : rows) {
    if (static_cast<int64_t>(row.size()) != c) {
      throw ShapeError("ragged initializer rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return From({r, c}, std::move(data));
}

int64_t Tensor::Dim(int64_t axis) const {
  if (axis < 0 || axis >= Rank()) {
    throw ShapeError(Msg("axis ", axis, " out of range for rank ", Rank()));
  }
  return shape_[static_cast<size_t>(axis)];
}

int64_t Tensor::Rows() const {
  if (Rank() != 2) throw ShapeError(Msg("expected rank-2 tensor, got ", ShapeStr()));
  return shape_[0];
}

int64_t Tensor::Cols() const {
  if (Rank() != 2) throw ShapeError(Msg("expected rank-2 tensor, got ", ShapeStr()));
  return shape_[1];
}

std::string Tensor::ShapeStr() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void Tensor::Fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::FillUniform(Rng& rng, double lo, double hi) {
  for (double& x : data_) x = rng.Uniform(lo, hi);
}

bool Tensor::AllFinite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::CheckFinite(const std::string& what) const {
  if (!AllFinite()) {
    throw NumericError(Msg(what, ": non-finite values in tensor ", ShapeStr()));
  }
}

void CheckMatmulNN(const Tensor& a, const Tensor& b) {
  if (a.Rank() != 2 || b.Rank() != 2 || a.Cols() != b.Rows()) {
    throw ShapeError(Msg("matmul: incompatible shapes ", a.ShapeStr(), " x ", b.ShapeStr()));
  }
}

}  // namespace slu
