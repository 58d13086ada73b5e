// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "sdist/common/error.hpp"
#include "sdist/simd/kernels.hpp"

namespace sdist::simd {
namespace {

constexpr KernelTable kScalarTable{Isa::kScalar, scalar::gemm_nn, scalar::gemm_nt, scalar::gemm_tn,
                                   scalar::dot, scalar::axpy};
#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2Table{Isa::kAvx2, avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn, avx2::dot,
                                 avx2::axpy};
#endif
#if defined(__aarch64__)
constexpr KernelTable kNeonTable{Isa::kNeon, neon::gemm_nn, neon::gemm_nt, neon::gemm_tn, neon::dot,
                                 neon::axpy};
#endif

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("SDIST_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return &kernels_for(Isa::kScalar);
    if (v == "avx2") return &kernels_for(Isa::kAvx2);
    if (v == "neon") return &kernels_for(Isa::kNeon);
  }
  return &kernels_for(best_available_isa());
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa best_available_isa() {
  if (isa_available(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_available(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

const KernelTable& kernels_for(Isa isa) {
  require(isa_available(isa), ErrorKind::kConfig, "SIMD ISA not available: " + std::string(isa_name(isa)));
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::kAvx2: return kAvx2Table;
#endif
#if defined(__aarch64__)
    case Isa::kNeon: return kNeonTable;
#endif
    default: return kScalarTable;
  }
}

const KernelTable& kernels() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = resolve_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_isa(Isa isa) { g_active.store(&kernels_for(isa), std::memory_order_release); }

Isa active_isa() { return kernels().isa; }

}  // namespace sdist::simd
