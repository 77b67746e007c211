// src/kernels/kernels.cpp

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

// Scalar reference kernels and the runtime dispatch table. The AVX2
// variants live in kernels_avx2.cpp (compiled with -mavx2 -mfma).

#include "slu/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "slu/common.hpp"

namespace slu::kernels {

namespace detail {

double DotScalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AxpyScalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void AdamUpdateScalar(double* theta, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    double mhat = m[i] / bias1;
    double vhat = v[i] / bias2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace detail

namespace {

struct DispatchTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*adam)(double*, const double*, double*, double*, std::size_t, double,
               double, double, double, double, double);
  Backend backend;
};

constexpr DispatchTable kScalarTable{detail::DotScalar, detail::AxpyScalar,
                                     detail::AdamUpdateScalar,
                                     Backend::kScalar};

#if defined(__x86_64__) || defined(_M_X64)
constexpr DispatchTable kAvx2Table{detail::DotAvx2, detail::AxpyAvx2,
                                   detail::AdamUpdateAvx2, Backend::kAvx2};
#endif

bool DetectAvx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const DispatchTable* InitialTable() {
  const char* env = std::getenv("SLU_BACKEND");
  if (env != nullptr) {
    std::string want(env);
    if (want == "scalar") return &kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
    if (want == "avx2" && DetectAvx2()) return &kAvx2Table;
#endif
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (DetectAvx2()) return &kAvx2Table;
#endif
  return &kScalarTable;
}

const DispatchTable* g_table = InitialTable();

}  // namespace

Backend ActiveBackend() { return g_table->backend; }

const char* BackendName() {
  return g_table->backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool CpuHasAvx2() { return DetectAvx2(); }

void SetBackend(Backend b) {
  if (b == Backend::kScalar) {
    g_table = &kScalarTable;
    return;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::kAvx2 && DetectAvx2()) {
    g_table = &kAvx2Table;
    return;
  }
#endif
  throw UsageError("kernels: requested backend not supported on this CPU");
}

double Dot(const double* a, const double* b, std::size_t n) {
  return g_table->dot(a, b, n);
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  g_table->axpy(alpha, x, y, n);
}

void AdamUpdate(double* theta, const double* g, double* m, double* v,
                std::size_t n, double lr, double beta1, double beta2,
                double eps, double bias1, double bias2) {
  g_table->adam(theta, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
}

// The matmul drivers share one loop structure across backends; only the
// row-level primitives (dot/axpy) are dispatched. Each output element is
// reduced in a fixed order, so results do not depend on how callers
// partition work.

void MatmulNN(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * p;
    if (!accumulate) std::memset(crow, 0, p * sizeof(double));
    const double* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double aik = arow[kk];
      if (aik != 0.0) {
        g_table->axpy(aik, b + kk * p, crow, p);
      }
    }
  }
}

void MatmulNT(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * p;
    for (std::size_t j = 0; j < p; ++j) {
      double val = g_table->dot(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + val : val;
    }
  }
}

void MatmulTN(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate) {
  if (!accumulate) std::memset(c, 0, k * p * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * p;
    for (std::size_t j = 0; j < k; ++j) {
      double aij = arow[j];
      if (aij != 0.0) {
        g_table->axpy(aij, brow, c + j * p, p);
      }
    }
  }
}

}  // namespace slu::kernels
