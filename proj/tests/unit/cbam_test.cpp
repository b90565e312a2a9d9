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

#include "dcd/cbam.hpp"
#include "dcd/errors.hpp"
#include "dcd/ops.hpp"
#include "test_util.hpp"

namespace dcd {
namespace {

using testing::random_tensor;

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TEST(Cbam, ZeroParametersQuarterInput) {
  Rng rng(1);
  const Cbam<double> cbam = make_cbam_zeros<double>(8, 4);
  const Tensor<double> f = random_tensor<double>(rng, {2, 8, 5, 5});
  AttentionWeights<double> w;
  const Tensor<double> y = cbam_forward(cbam, f, &w);
  for (double m : w.m_c.data()) EXPECT_EQ(m, 0.5);
  for (double m : w.m_s.data()) EXPECT_EQ(m, 0.5);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.25 * f[i]);
}

TEST(Cbam, ZeroInputZeroOutput) {
  Rng rng(2);
  const Cbam<float> cbam = make_cbam<float>(rng, 16, 4);
  const Tensor<float> y = cbam_forward(cbam, Tensor<float>({1, 16, 4, 4}));
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Cbam, ShapesAndBounds) {
  Rng rng(3);
  Cbam<double> cbam = make_cbam<double>(rng, 12, 3);
  ParameterList<double> params;
  cbam.collect("cbam", params);
  for (auto& p : params)
    for (double& v : p.tensor.mutable_data()) v = rng.uniform(-50, 50);
  const Tensor<double> f = random_tensor<double>(rng, {2, 12, 6, 7}, -100, 100);
  AttentionWeights<double> w;
  const Tensor<double> y = cbam_forward(cbam, f, &w);
  EXPECT_EQ(y.shape(), f.shape());
  EXPECT_EQ(w.m_c.shape(), (Shape{2, 12}));
  EXPECT_EQ(w.m_s.shape(), (Shape{2, 1, 6, 7}));
  for (double m : w.m_c.data()) {
    EXPECT_GT(m, 0.0);
    EXPECT_LT(m, 1.0);
  }
  for (double m : w.m_s.data()) {
    EXPECT_GT(m, 0.0);
    EXPECT_LT(m, 1.0);
  }
}

TEST(Cbam, ConstantChannelClosedForm) {
  // A per-channel constant map has equal mean and max, so
  // m_c = sigmoid(2 * MLP(values)).
  Rng rng(4);
  const Cbam<double> cbam = make_cbam<double>(rng, 4, 2);
  const std::vector<double> vals{0.3, -1.2, 2.0, 0.7};
  std::vector<double> f(4 * 9);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) f[c * 9 + i] = vals[c];
  AttentionWeights<double> w;
  cbam_forward(cbam, Tensor<double>({1, 4, 3, 3}, f), &w);

  const auto& w1 = cbam.channel.mlp_w1;
  const auto& w2 = cbam.channel.mlp_w2;
  std::vector<double> hidden(2);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = w1.bias[j];
    for (std::size_t c = 0; c < 4; ++c) s += w1.weight[j * 4 + c] * vals[c];
    hidden[j] = std::max(s, 0.0);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    double s = w2.bias[c];
    for (std::size_t j = 0; j < 2; ++j) s += w2.weight[c * 2 + j] * hidden[j];
    EXPECT_NEAR(w.m_c[c], sigmoid_ref(2.0 * s), 1e-14);
  }
}

TEST(Cbam, ChannelGateIgnoresSpatialPermutation) {
  Rng rng(5);
  const Cbam<double> cbam = make_cbam<double>(rng, 4, 2);
  const Tensor<double> f = random_tensor<double>(rng, {1, 4, 4, 4});
  std::vector<double> flipped(f.numel());
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 16; ++i) flipped[c * 16 + i] = f[c * 16 + 15 - i];
  const auto a = channel_attention(cbam.channel, f);
  const auto b = channel_attention(cbam.channel, Tensor<double>({1, 4, 4, 4}, flipped));
  EXPECT_TRUE(testing::bit_equal(a.m_c, b.m_c));
}

TEST(Cbam, EffectiveReduction) {
  EXPECT_EQ(effective_reduction(256, 16), 16u);
  EXPECT_EQ(effective_reduction(8, 16), 8u);
  EXPECT_THROW(effective_reduction(12, 5), ContractError);
  EXPECT_THROW(effective_reduction(8, 0), ContractError);
  EXPECT_THROW(make_cbam_zeros<float>(12, 5), ContractError);
}

TEST(Cbam, ChannelMismatchThrows) {
  const Cbam<float> cbam = make_cbam_zeros<float>(8, 2);
  EXPECT_THROW(cbam_forward(cbam, Tensor<float>({1, 4, 3, 3})), DimensionError);
}

}  // namespace
}  // namespace dcd
