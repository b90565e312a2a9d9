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

#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop arithmetic used by the tensor ops. Every routine has a scalar
// reference implementation and an AVX2/FMA variant; the variant is picked
// once at startup from CPUID and can be overridden for testing.
namespace dcd::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// Best ISA the host supports (honours DCD_FORCE_SCALAR=1 in the environment).
Isa detected_isa();
Isa active_isa();
// Throws ContractError if the host cannot run `isa`.
void set_active_isa(Isa isa);

class IsaScope {
 public:
  explicit IsaScope(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~IsaScope() { set_active_isa(previous_); }
  IsaScope(const IsaScope&) = delete;
  IsaScope& operator=(const IsaScope&) = delete;

 private:
  Isa previous_;
};

// C[m x n] (+)= A[m x k] * B[k x n], row-major with leading dimensions.
// When accumulate is false C is overwritten.
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);

// y = max(x, 0)
void relu(std::size_t n, const float* x, float* y);
void relu(std::size_t n, const double* x, double* y);

// gx += gy where x > 0
void relu_backward(std::size_t n, const float* x, const float* gy, float* gx);
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);

float sum(std::size_t n, const float* x);
double sum(std::size_t n, const double* x);

// dst[c * rows + r] = src[r * cols + c]
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst);

namespace scalar {
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
void relu(std::size_t n, const float* x, float* y);
void relu(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const float* x, const float* gy, float* gx);
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);
float sum(std::size_t n, const float* x);
double sum(std::size_t n, const double* x);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define DCD_HAVE_AVX2_KERNELS 1
namespace avx2 {
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
void relu(std::size_t n, const float* x, float* y);
void relu(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const float* x, const float* gy, float* gx);
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx);
float sum(std::size_t n, const float* x);
double sum(std::size_t n, const double* x);
}  // namespace avx2
#else
#define DCD_HAVE_AVX2_KERNELS 0
#endif

}  // namespace dcd::kernels
