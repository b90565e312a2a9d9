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

// Compiled with -mavx2 -mfma. Only reached through the dispatcher after a
// CPUID check, so nothing here may run at static-initialization time.

#include <immintrin.h>

#include <algorithm>

#include "dcd/kernels/kernels.hpp"

namespace dcd::kernels::avx2 {
namespace {

struct F32 {
  using Scalar = float;
  using Vec = __m256;
  static constexpr std::size_t kLanes = 8;
  static Vec zero() { return _mm256_setzero_ps(); }
  static Vec load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Vec v) { _mm256_storeu_ps(p, v); }
  static Vec broadcast(float v) { return _mm256_set1_ps(v); }
  static Vec fmadd(Vec a, Vec b, Vec c) { return _mm256_fmadd_ps(a, b, c); }
  static Vec add(Vec a, Vec b) { return _mm256_add_ps(a, b); }
  static Vec max(Vec a, Vec b) { return _mm256_max_ps(a, b); }
  static Vec gt_mask(Vec a, Vec b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static Vec and_(Vec a, Vec b) { return _mm256_and_ps(a, b); }
  static float hsum(Vec v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

struct F64 {
  using Scalar = double;
  using Vec = __m256d;
  static constexpr std::size_t kLanes = 4;
  static Vec zero() { return _mm256_setzero_pd(); }
  static Vec load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Vec v) { _mm256_storeu_pd(p, v); }
  static Vec broadcast(double v) { return _mm256_set1_pd(v); }
  static Vec fmadd(Vec a, Vec b, Vec c) { return _mm256_fmadd_pd(a, b, c); }
  static Vec add(Vec a, Vec b) { return _mm256_add_pd(a, b); }
  static Vec max(Vec a, Vec b) { return _mm256_max_pd(a, b); }
  static Vec gt_mask(Vec a, Vec b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static Vec and_(Vec a, Vec b) { return _mm256_and_pd(a, b); }
  static double hsum(Vec v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// ROWS x (2 vectors) register tile of C, accumulated over kc steps of K.
template <typename V, int ROWS>
inline void micro_tile(std::size_t kc, const typename V::Scalar* a, std::size_t lda,
                       const typename V::Scalar* b, std::size_t ldb, typename V::Scalar* c,
                       std::size_t ldc) {
  typename V::Vec acc0[ROWS];
  typename V::Vec acc1[ROWS];
  for (int r = 0; r < ROWS; ++r) {
    acc0[r] = V::zero();
    acc1[r] = V::zero();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const auto b0 = V::load(b + p * ldb);
    const auto b1 = V::load(b + p * ldb + V::kLanes);
    for (int r = 0; r < ROWS; ++r) {
      const auto av = V::broadcast(a[r * lda + p]);
      acc0[r] = V::fmadd(av, b0, acc0[r]);
      acc1[r] = V::fmadd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < ROWS; ++r) {
    typename V::Scalar* crow = c + r * ldc;
    V::store(crow, V::add(V::load(crow), acc0[r]));
    V::store(crow + V::kLanes, V::add(V::load(crow + V::kLanes), acc1[r]));
  }
}

// Column tail narrower than one tile: plain loops.
template <typename T>
inline void tail_cols(std::size_t rows, std::size_t cols, std::size_t kc, const T* a,
                      std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = 0; p < kc; ++p) {
      const T av = a[r * lda + p];
      const T* brow = b + p * ldb;
      T* crow = c + r * ldc;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename V>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const typename V::Scalar* a,
               std::size_t lda, const typename V::Scalar* b, std::size_t ldb,
               typename V::Scalar* c, std::size_t ldc, bool accumulate) {
  using T = typename V::Scalar;
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, T(0));
  }
  constexpr std::size_t kTileN = 2 * V::kLanes;
  constexpr std::size_t kBlockK = 256;
  const std::size_t n_full = n - n % kTileN;
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t kc = std::min(kBlockK, k - k0);
    for (std::size_t j = 0; j < n_full; j += kTileN) {
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        micro_tile<V, 4>(kc, a + i * lda + k0, lda, b + k0 * ldb + j, ldb, c + i * ldc + j, ldc);
      }
      switch (m - i) {
        case 3:
          micro_tile<V, 3>(kc, a + i * lda + k0, lda, b + k0 * ldb + j, ldb, c + i * ldc + j, ldc);
          break;
        case 2:
          micro_tile<V, 2>(kc, a + i * lda + k0, lda, b + k0 * ldb + j, ldb, c + i * ldc + j, ldc);
          break;
        case 1:
          micro_tile<V, 1>(kc, a + i * lda + k0, lda, b + k0 * ldb + j, ldb, c + i * ldc + j, ldc);
          break;
        default:
          break;
      }
    }
    if (n_full < n) {
      tail_cols(m, n - n_full, kc, a + k0, lda, b + k0 * ldb + n_full, ldb, c + n_full, ldc);
    }
  }
}

template <typename V>
void axpy_impl(std::size_t n, typename V::Scalar alpha, const typename V::Scalar* x,
               typename V::Scalar* y) {
  const auto va = V::broadcast(alpha);
  std::size_t i = 0;
  for (; i + V::kLanes <= n; i += V::kLanes) {
    V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename V>
void relu_impl(std::size_t n, const typename V::Scalar* x, typename V::Scalar* y) {
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::kLanes <= n; i += V::kLanes) V::store(y + i, V::max(V::load(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0 ? x[i] : 0;
}

template <typename V>
void relu_backward_impl(std::size_t n, const typename V::Scalar* x, const typename V::Scalar* gy,
                        typename V::Scalar* gx) {
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::kLanes <= n; i += V::kLanes) {
    const auto mask = V::gt_mask(V::load(x + i), z);
    V::store(gx + i, V::add(V::load(gx + i), V::and_(mask, V::load(gy + i))));
  }
  for (; i < n; ++i) {
    if (x[i] > 0) gx[i] += gy[i];
  }
}

template <typename V>
typename V::Scalar sum_impl(std::size_t n, const typename V::Scalar* x) {
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::kLanes <= n; i += V::kLanes) acc = V::add(acc, V::load(x + i));
  typename V::Scalar s = V::hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  gemm_impl<F32>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  gemm_impl<F64>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) { axpy_impl<F32>(n, alpha, x, y); }
void axpy(std::size_t n, double alpha, const double* x, double* y) {
  axpy_impl<F64>(n, alpha, x, y);
}

void relu(std::size_t n, const float* x, float* y) { relu_impl<F32>(n, x, y); }
void relu(std::size_t n, const double* x, double* y) { relu_impl<F64>(n, x, y); }

void relu_backward(std::size_t n, const float* x, const float* gy, float* gx) {
  relu_backward_impl<F32>(n, x, gy, gx);
}
void relu_backward(std::size_t n, const double* x, const double* gy, double* gx) {
  relu_backward_impl<F64>(n, x, gy, gx);
}

float sum(std::size_t n, const float* x) { return sum_impl<F32>(n, x); }
double sum(std::size_t n, const double* x) { return sum_impl<F64>(n, x); }

}  // namespace dcd::kernels::avx2
