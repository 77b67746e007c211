// slu/kernels.hpp

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

// Data-parallel inner loops behind the tensor math. Each kernel has a
// scalar reference implementation and an AVX2+FMA variant; the backend is
// picked once at startup from CPUID (override with SetBackend or the
// SLU_BACKEND env var: "scalar" | "avx2").
//
// Determinism contract: for a fixed backend, every output element is
// produced by a fixed reduction order independent of call site and matrix
// partitioning, so repeated runs are bit-identical. Scalar and AVX2
// backends may differ in the last ulps (different reduction trees); the
// unit suite bounds that difference.

#ifndef SLU_KERNELS_HPP_
#define SLU_KERNELS_HPP_

#include <cstddef>

namespace slu::kernels {

enum class Backend { kScalar, kAvx2 };

/// Backend currently dispatched to.
Backend ActiveBackend();

/// Human-readable backend name ("scalar" / "avx2").
const char* BackendName();

/// Force a backend (tests). Throws UsageError if unsupported on this CPU.
void SetBackend(Backend b);

/// True if the running CPU reports AVX2 and FMA.
bool CpuHasAvx2();

/// dot(a, b) over n elements.
double Dot(const double* a, const double* b, std::size_t n);

/// y[i] += alpha * x[i]
void Axpy(double alpha, const double* x, double* y, std::size_t n);

/// c = a . b with a: m x k, b: k x p, c: m x p, all row-major.
/// accumulate=true adds into c instead of overwriting.
void MatmulNN(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate = false);

/// c = a . b^T with a: m x k, b: p x k, c: m x p.
void MatmulNT(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate = false);

/// c = a^T . b with a: m x k, b: m x p, c: k x p.
void MatmulTN(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p, bool accumulate = false);

/// Fused Adam update over one parameter block of n scalars:
///   m = beta1*m + (1-beta1)*g
///   v = beta2*v + (1-beta2)*g^2
///   theta -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
/// bias1/bias2 are the step-dependent bias corrections 1-beta^t.
void AdamUpdate(double* theta, const double* g, double* m, double* v,
                std::size_t n, double lr, double beta1, double beta2,
                double eps, double bias1, double bias2);

namespace detail {
// Raw per-backend entry points, exposed for the equivalence tests.
double DotScalar(const double* a, const double* b, std::size_t n);
void AxpyScalar(double alpha, const double* x, double* y, std::size_t n);
void AdamUpdateScalar(double* theta, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
#if defined(__x86_64__) || defined(_M_X64)
double DotAvx2(const double* a, const double* b, std::size_t n);
void AxpyAvx2(double alpha, const double* x, double* y, std::size_t n);
void AdamUpdateAvx2(double* theta, const double* g, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bias1, double bias2);
#endif
}  // namespace detail

}  // namespace slu::kernels

#endif  // SLU_KERNELS_HPP_
