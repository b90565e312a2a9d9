/*
 * Copyright 2026 The DCD Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "dcd/errors.hpp"
#include "dcd/kernels/kernels.hpp"

namespace dcd::kernels {
namespace {

bool host_has_avx2() {
#if DCD_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa probe() {
  const char* force = std::getenv("DCD_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "1") == 0) return Isa::kScalar;
  return host_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{probe()};
  return slot;
}

bool use_avx2() {
#if DCD_HAVE_AVX2_KERNELS
  return active_slot().load(std::memory_order_relaxed) == Isa::kAvx2;
#else
  return false;
#endif
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active_slot().load(); }

void set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !host_has_avx2()) {
    throw ContractError("set_active_isa: host does not support AVX2/FMA");
  }
  active_slot().store(isa);
}

#if DCD_HAVE_AVX2_KERNELS
#define DCD_DISPATCH(fn, ...) \
  (use_avx2() ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define DCD_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  DCD_DISPATCH(gemm, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  DCD_DISPATCH(gemm, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  DCD_DISPATCH(axpy, n, alpha, x, y);
}
void axpy(std::size_t n, double alpha, const double* x, double* y) {
  DCD_DISPATCH(axpy, n, alpha, x, y);
}

void relu(std::size_t n, const float* x, float* y) { DCD_DISPATCH(relu, n, x, y); }
void relu(std::size_t n, const double* x, double* y) { DCD_DISPATCH(relu, n, x, y); }

void relu_backward(std::size_t n, const float* x, const float* gy, float* gx) {
  DCD_DISPATCH(relu_backward, n, x, gy, gx);
}
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx) {
  DCD_DISPATCH(relu_backward, n, x, gy, gx);
}

float sum(std::size_t n, const float* x) { return DCD_DISPATCH(sum, n, x); }
double sum(std::size_t n, const double* x) { return DCD_DISPATCH(sum, n, x); }

#undef DCD_DISPATCH

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = r0 + kBlock < rows ? r0 + kBlock : rows;
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = c0 + kBlock < cols ? c0 + kBlock : cols;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);

}  // namespace dcd::kernels
