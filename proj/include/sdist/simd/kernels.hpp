// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision kernels used by the autodiff engine. Every kernel
// has a scalar reference implementation; vector variants are selected at
// runtime and must agree with the reference to rounding (they use FMA, so
// results are not bitwise identical across ISAs, but each ISA is itself
// deterministic).

namespace sdist::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  /// C(m x n) = A(m x k) * B(k x n). Row-major, contiguous.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  /// C(m x n) = A(m x k) * B(n x k)^T.
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  /// C(m x n) = A(k x m)^T * B(k x n).
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  double (*dot)(std::size_t n, const double* x, const double* y);
  /// y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
};

/// Kernels for the active ISA. Chosen on first use from CPU features, unless
/// SDIST_SIMD=scalar|avx2|neon is set or force_isa() was called.
const KernelTable& kernels();

/// Kernels for a specific ISA; throws if that ISA is unavailable here.
const KernelTable& kernels_for(Isa isa);

bool isa_available(Isa isa);
Isa best_available_isa();
void force_isa(Isa isa);
Isa active_isa();

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace neon
#endif

}  // namespace sdist::simd
