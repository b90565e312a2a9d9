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

#include "dcd/errors.hpp"
#include "dcd/gradcheck.hpp"
#include "dcd/ops.hpp"
#include "test_util.hpp"

namespace dcd {
namespace {

using testing::random_tensor;

TEST(Tensor, ConstructionChecksValueCount) {
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  const Tensor<float> s = Tensor<float>::scalar(3.5f);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.item(), 3.5f);
  EXPECT_THROW(Tensor<float>::zeros({2}).item(), ContractError);
}

TEST(Tensor, CloneIsDeepReshapedIsDeep) {
  Tensor<double> a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> b = a.clone();
  b.mutable_data()[0] = 9;
  EXPECT_EQ(a.data()[0], 1);
  EXPECT_FALSE(a.same_storage(b));
  EXPECT_EQ(a.reshaped({4}).shape(), Shape{4});
}

TEST(Elementwise, ScalarExamples) {
  EXPECT_EQ(sigmoid(Tensor<double>::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(relu(Tensor<double>::scalar(-3.2)).item(), 0.0);
  EXPECT_EQ(relu(Tensor<double>::scalar(3.2)).item(), 3.2);
  const Tensor<float> s = add(Tensor<float>({2}, std::vector<float>{1, 2}),
                              Tensor<float>({2}, std::vector<float>{3, 4}));
  EXPECT_EQ(s.data()[0], 4.0f);
  EXPECT_EQ(s.data()[1], 6.0f);
}

TEST(Elementwise, BroadcastSingletonAxes) {
  const Tensor<float> a({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const Tensor<float> b({1, 3}, std::vector<float>{10, 20, 30});
  const Tensor<float> c = add(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 3}));
  EXPECT_EQ(c.data()[4], 25.0f);
  EXPECT_THROW(add(a, Tensor<float>({3}, 1.0f)), DimensionError);
  EXPECT_THROW(add(a, Tensor<float>({2, 2}, 1.0f)), DimensionError);
}

TEST(Elementwise, DivisionByExactZeroIsNumericError) {
  EXPECT_THROW(div(Tensor<double>::scalar(1.0), Tensor<double>::scalar(0.0)), NumericError);
}

TEST(Elementwise, SigmoidStaysStrictlyInsideUnitInterval) {
  const Tensor<float> x({4}, std::vector<float>{-1e4f, -100.0f, 100.0f, 1e4f});
  const Tensor<float> y = sigmoid(x);
  for (float v : y.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Matmul, HandDotProduct) {
  const Tensor<double> a({1, 2}, std::vector<double>{1, 2});
  const Tensor<double> b({2, 1}, std::vector<double>{3, 4});
  const double oracle = 1.0 * 3.0 + 2.0 * 4.0;
  EXPECT_EQ(matmul(a, b).item(), oracle);
  EXPECT_EQ(oracle, 11.0);
}

TEST(Matmul, IdentityAndZero) {
  const Tensor<float> eye({2, 2}, std::vector<float>{1, 0, 0, 1});
  const Tensor<float> m({2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_TRUE(testing::bit_equal(matmul(eye, m), m));
  Rng rng(1);
  const Tensor<float> z = matmul(Tensor<float>::zeros({2, 3}), random_tensor<float>(rng, {3, 4}));
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(matmul(m, Tensor<float>::zeros({3, 1})), DimensionError);
}

TEST(Reduce, MeanSumMax) {
  const Tensor<double> t({2, 2}, std::vector<double>{1, 2, 3, 4});
  const double oracle = (1.0 + 2.0 + 3.0 + 4.0) / 4.0;
  EXPECT_EQ(reduce(Reduction::kMean, t, {0, 1}).item(), oracle);
  EXPECT_EQ(oracle, 2.5);
  EXPECT_EQ(reduce(Reduction::kMax, Tensor<double>({3, 3}, 7.0), {0, 1}).item(), 7.0);
  EXPECT_EQ(sum_all(Tensor<double>::zeros({5, 2})).item(), 0.0);
  const Tensor<double> rows = reduce(Reduction::kSum, t, {1}, true);
  EXPECT_EQ(rows.shape(), (Shape{2, 1}));
  EXPECT_EQ(rows.data()[1], 7.0);
  EXPECT_THROW(reduce(Reduction::kSum, t, {2}), DimensionError);
  EXPECT_THROW(reduce(Reduction::kSum, t, {0, 0}), DimensionError);
}

TEST(Reduce, MaxGradientGoesToFirstMaximum) {
  Tensor<double> t({4}, std::vector<double>{1, 5, 5, 2});
  t.set_requires_grad();
  GradTape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(reduce(Reduction::kMax, t, {0}));
  }
  EXPECT_EQ(t.grad()[1], 1.0);
  EXPECT_EQ(t.grad()[2], 0.0);
}

TEST(Softmax, UniformStableShiftInvariant) {
  const Tensor<double> u = softmax(Tensor<double>({1, 14}, 0.0), 1);
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 14.0, 1e-15);
  const Tensor<double> big = softmax(Tensor<double>({2}, std::vector<double>{1000, 0}), 0);
  EXPECT_NEAR(big.data()[0], 1.0, 1e-15);
  EXPECT_NEAR(big.data()[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(big.data()[1]));
  Rng rng(3);
  const Tensor<double> x = random_tensor<double>(rng, {3, 5});
  const Tensor<double> shifted = softmax(affine(x, 1.0, 17.0), 1);
  EXPECT_LT(testing::max_abs_diff(softmax(x, 1), shifted), 1e-14);
}

TEST(Slice, RecoversBlocks) {
  const Tensor<float> t({1, 4, 1, 1}, std::vector<float>{0, 1, 2, 3});
  const Tensor<float> s = slice(t, 1, 1, 3);
  EXPECT_EQ(s.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_EQ(s.data()[0], 1.0f);
  EXPECT_THROW(slice(t, 1, 3, 5), DimensionError);
}

TEST(Tape, BackwardOnceOnScalarRoot) {
  Tensor<double> x({2}, std::vector<double>{1, 2});
  x.set_requires_grad();
  GradTape<double> tape;
  Tensor<double> y;
  {
    TapeScope<double> scope(tape);
    y = sum_all(mul(x, x));
    EXPECT_THROW(tape.backward(mul(x, x)), ContractError);
  }
  tape.backward(y);
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, NoGradScopeRecordsNothing) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad();
  GradTape<double> tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> off;
    sum_all(x);
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, FanOutAccumulates) {
  Tensor<double> x = Tensor<double>::scalar(3.0);
  x.set_requires_grad();
  GradTape<double> tape;
  {
    TapeScope<double> scope(tape);
    const Tensor<double> y = add(mul(x, x), x);
    tape.backward(y);
  }
  EXPECT_EQ(x.grad()[0], 7.0);
}

TEST(GradCheck, ClosedFormSquare) {
  const Tensor<double> x({2}, std::vector<double>{1, 2});
  const auto r = grad_check([](const Tensor<double>& v) { return sum_all(mul(v, v)); }, x, 1e-5);
  EXPECT_LE(r.max_rel_error, 1e-6);
  EXPECT_EQ(r.coords_checked, 2u);
}

TEST(GradCheck, LinearFunctionIsExact) {
  Rng rng(11);
  const Tensor<double> x = random_tensor<double>(rng, {3, 4});
  const auto r = grad_check([](const Tensor<double>& v) { return sum_all(v); }, x, 1e-5);
  EXPECT_LE(r.max_rel_error, 1e-10);
}

TEST(GradCheck, RejectsNonScalar) {
  const Tensor<double> x({2}, 1.0);
  EXPECT_THROW(grad_check([](const Tensor<double>& v) { return mul(v, v); }, x, 1e-5),
               ContractError);
}

TEST(GradCheck, CatchesAWrongGradient) {
  // The taped and untaped evaluations differ by a factor of two, so the
  // analytic and numeric slopes disagree and the check must say so.
  Tensor<double> x = Tensor<double>::scalar(0.3);
  const auto broken = [&]() {
    const Tensor<double> y = sigmoid(x);
    return active_tape<double>() == nullptr ? affine(y, 2.0, 0.0) : y;
  };
  GradCheckOptions options;
  const auto r = grad_check(broken, {x}, options);
  EXPECT_GT(r.max_rel_error, 0.4);
}

TEST(Property, AddCommutesAndMulDistributes) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const std::size_t m = 1 + rng.below(6);
    const Tensor<double> a = random_tensor<double>(rng, {n, m});
    const Tensor<double> b = random_tensor<double>(rng, {n, m});
    const Tensor<double> c = random_tensor<double>(rng, {1, m});
    EXPECT_TRUE(testing::bit_equal(add(a, b), add(b, a)));
    EXPECT_LT(testing::max_abs_diff(mul(add(a, b), c), add(mul(a, c), mul(b, c))), 1e-14);
  }
}

}  // namespace
}  // namespace dcd
