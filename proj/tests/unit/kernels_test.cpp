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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "dcd/errors.hpp"
#include "dcd/kernels/kernels.hpp"
#include "dcd/nn.hpp"
#include "test_util.hpp"

namespace dcd::kernels {
namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, std::size_t n) {
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

bool host_has_avx2() { return detected_isa() == Isa::kAvx2; }

// Double-precision reference with |a||b| magnitudes for an error bound.
template <typename T>
void reference_gemm(std::size_t m, std::size_t n, std::size_t k, const std::vector<T>& a,
                    std::size_t lda, const std::vector<T>& b, std::size_t ldb,
                    std::vector<double>& c, std::vector<double>& mag) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      double g = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s += static_cast<double>(a[i * lda + p]) * b[p * ldb + j];
        g += std::abs(static_cast<double>(a[i * lda + p]) * b[p * ldb + j]);
      }
      c[i * n + j] += s;
      mag[i * n + j] += g;
    }
  }
}

template <typename T>
void check_gemm(Isa isa, std::uint64_t seed) {
  IsaScope scope(isa);
  Rng rng(seed);
  const double unit = std::numeric_limits<T>::epsilon();
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.below(19);
    const std::size_t n = 1 + rng.below(37);
    const std::size_t k = 1 + rng.below(300);
    const std::size_t lda = k + rng.below(3);
    const std::size_t ldb = n + rng.below(3);
    const std::size_t ldc = n + rng.below(3);
    const auto a = random_vec<T>(rng, m * lda);
    const auto b = random_vec<T>(rng, k * ldb);
    auto c = random_vec<T>(rng, m * ldc);
    const bool accumulate = rng.below(2) == 1;
    std::vector<double> expect(m * n, 0.0);
    std::vector<double> mag(m * n, 0.0);
    if (accumulate) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          expect[i * n + j] = c[i * ldc + j];
          mag[i * n + j] = std::abs(static_cast<double>(c[i * ldc + j]));
        }
    }
    reference_gemm(m, n, k, a, lda, b, ldb, expect, mag);
    const auto before = c;
    gemm(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc, accumulate);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < ldc; ++j) {
        if (j >= n) {
          EXPECT_EQ(c[i * ldc + j], before[i * ldc + j]) << "padding column written";
          continue;
        }
        const double bound = 2.0 * static_cast<double>(k + 1) * unit * mag[i * n + j] + 1e-300;
        EXPECT_LE(std::abs(c[i * ldc + j] - expect[i * n + j]), bound)
            << isa_name(isa) << " m=" << m << " n=" << n << " k=" << k;
      }
    }
  }
}

TEST(Kernels, ScalarGemmMatchesReference) {
  check_gemm<float>(Isa::kScalar, 1);
  check_gemm<double>(Isa::kScalar, 2);
}

TEST(Kernels, Avx2GemmMatchesReference) {
  if (!host_has_avx2()) GTEST_SKIP() << "host lacks AVX2/FMA";
  check_gemm<float>(Isa::kAvx2, 1);
  check_gemm<double>(Isa::kAvx2, 2);
}

template <typename T>
void check_vector_ops() {
  Rng rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 31u, 100u, 1027u}) {
    const auto x = random_vec<T>(rng, n);
    const auto gy = random_vec<T>(rng, n);
    const auto y0 = random_vec<T>(rng, n);
    const T alpha = static_cast<T>(rng.uniform(-2.0, 2.0));

    std::vector<T> ys(n), yv(n);
    {
      IsaScope s(Isa::kScalar);
      relu(n, x.data(), ys.data());
    }
    {
      IsaScope s(Isa::kAvx2);
      relu(n, x.data(), yv.data());
    }
    EXPECT_EQ(ys, yv);

    std::vector<T> gs(y0), gv(y0);
    {
      IsaScope s(Isa::kScalar);
      relu_backward(n, x.data(), gy.data(), gs.data());
    }
    {
      IsaScope s(Isa::kAvx2);
      relu_backward(n, x.data(), gy.data(), gv.data());
    }
    EXPECT_EQ(gs, gv);

    std::vector<T> as(y0), av(y0);
    {
      IsaScope s(Isa::kScalar);
      axpy(n, alpha, x.data(), as.data());
    }
    {
      IsaScope s(Isa::kAvx2);
      axpy(n, alpha, x.data(), av.data());
    }
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(as[i], av[i], 4 * std::numeric_limits<T>::epsilon());
    }

    T ss, sv;
    {
      IsaScope s(Isa::kScalar);
      ss = sum(n, x.data());
    }
    {
      IsaScope s(Isa::kAvx2);
      sv = sum(n, x.data());
    }
    EXPECT_NEAR(ss, sv, 2.0 * static_cast<double>(n + 1) * std::numeric_limits<T>::epsilon());
  }
}

TEST(Kernels, VectorOpsAgreeAcrossIsas) {
  if (!host_has_avx2()) GTEST_SKIP() << "host lacks AVX2/FMA";
  check_vector_ops<float>();
  check_vector_ops<double>();
}

TEST(Kernels, TransposeRoundTrip) {
  Rng rng(5);
  const std::size_t rows = 37, cols = 70;
  const auto src = random_vec<float>(rng, rows * cols);
  std::vector<float> t(rows * cols), back(rows * cols);
  transpose(rows, cols, src.data(), t.data());
  EXPECT_EQ(t[5 * rows + 3], src[3 * cols + 5]);
  transpose(cols, rows, t.data(), back.data());
  EXPECT_EQ(src, back);
}

TEST(Kernels, IsaScopeRestores) {
  const Isa before = active_isa();
  {
    IsaScope scope(Isa::kScalar);
    EXPECT_EQ(active_isa(), Isa::kScalar);
  }
  EXPECT_EQ(active_isa(), before);
  EXPECT_EQ(isa_name(Isa::kScalar), "scalar");
}

// The whole convolution agrees across instruction sets and algorithms.
TEST(Kernels, ConvolutionAgreesAcrossIsasAndAlgorithms) {
  Rng rng(9);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t cin = 1 + rng.below(5);
    const std::size_t cout = 1 + rng.below(6);
    const std::size_t d = 1 + rng.below(4);
    const std::size_t stride = 1 + rng.below(2);
    const Conv2dLayer<double> layer = init_params<double>(rng, Conv2dSpec{cin, cout, 3, d, stride});
    const Tensor<double> x = testing::random_tensor<double>(rng, {2, cin, 11, 9});
    const Tensor<double> direct = conv2d(layer, x, ConvAlgorithm::kDirect);
    Tensor<double> scalar_out;
    {
      IsaScope s(Isa::kScalar);
      scalar_out = conv2d(layer, x, ConvAlgorithm::kIm2col);
    }
    EXPECT_LT(testing::max_abs_diff(direct, scalar_out), 1e-12);
    if (host_has_avx2()) {
      IsaScope s(Isa::kAvx2);
      EXPECT_LT(testing::max_abs_diff(direct, conv2d(layer, x, ConvAlgorithm::kIm2col)), 1e-12);
    }
  }
}

}  // namespace
}  // namespace dcd::kernels
