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

#include "dcd/aspp.hpp"
#include "dcd/errors.hpp"
#include "dcd/ops.hpp"
#include "test_util.hpp"

namespace dcd {
namespace {

using testing::random_tensor;

AsppSpec small_spec(std::size_t in = 4) {
  AsppSpec s;
  s.in_channels = in;
  s.inter = 6;
  s.growth = 3;
  s.out_channels = 5;
  return s;
}

TEST(DenseAspp, ChannelBookkeeping) {
  AsppSpec spec;
  spec.in_channels = 512;
  spec.growth = 64;
  const DenseAsppBlock<float> block = make_dense_aspp_zeros<float>(spec);
  EXPECT_EQ(block.pre_projection_channels(), 768u);
  EXPECT_EQ(block.rates(), kDenseAsppRates);
  for (std::size_t l = 0; l < block.layers.size(); ++l) {
    EXPECT_EQ(block.layers[l].reduce.in_channels(), 512 + l * 64);
    EXPECT_EQ(block.layers[l].dilated.weight.dim(2), 3u);
  }
  EXPECT_EQ(block.project.in_channels(), 768u);
}

TEST(PlainAspp, BranchCount) {
  AsppSpec spec = small_spec();
  spec.rates = kPlainAsppRates;
  const PlainAsppBlock<float> block = make_plain_aspp_zeros<float>(spec);
  EXPECT_EQ(block.branch_count(), 5u);
  EXPECT_EQ(block.pre_projection_channels(), 5 * spec.growth);
  Rng rng(1);
  const PlainAsppBlock<float> live = make_plain_aspp<float>(rng, spec);
  EXPECT_EQ(plain_aspp_forward(live, random_tensor<float>(rng, {2, 4, 8, 8})).shape(),
            (Shape{2, 5, 8, 8}));
}

TEST(DenseAspp, ExtentPreserved) {
  Rng rng(2);
  const DenseAsppBlock<float> block = make_dense_aspp<float>(rng, small_spec());
  EXPECT_EQ(dense_aspp_forward(block, random_tensor<float>(rng, {1, 4, 32, 32})).shape(),
            (Shape{1, 5, 32, 32}));
  EXPECT_EQ(dense_aspp_forward(block, random_tensor<float>(rng, {1, 4, 5, 7})).shape(),
            (Shape{1, 5, 5, 7}));
}

TEST(DenseAspp, ZeroParametersZeroOutput) {
  Rng rng(3);
  const DenseAsppBlock<double> block = make_dense_aspp_zeros<double>(small_spec());
  const Tensor<double> y = dense_aspp_forward(block, random_tensor<double>(rng, {1, 4, 8, 8}));
  for (double v : y.data()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(DenseAspp, SingleLayerMatchesSeveredAndPlainConv) {
  // With one rate the dense and severed blocks see identical inputs.
  Rng rng(4);
  AsppSpec spec = small_spec();
  spec.rates = {6};
  DenseAsppBlock<double> dense = make_dense_aspp<double>(rng, spec);
  DenseAsppBlock<double> severed = dense;
  severed.dense_links = false;
  const Tensor<double> x = random_tensor<double>(rng, {1, 4, 16, 16});
  EXPECT_TRUE(testing::bit_equal(dense_aspp_forward(dense, x), dense_aspp_forward(severed, x)));

  // Branch output equals relu(conv_d(relu(conv_1x1(x)))).
  const auto& layer = dense.layers[0];
  const Tensor<double> branch = relu(conv2d(layer.dilated, relu(conv2d(layer.reduce, x))));
  const Tensor<double> expected =
      relu(conv2d(dense.project, concat<double>({x, branch})));
  EXPECT_LT(testing::max_abs_diff(dense_aspp_forward(dense, x), expected), 1e-12);
}

TEST(DenseAspp, DenseLinksMatter) {
  Rng rng(5);
  DenseAsppBlock<double> dense = make_dense_aspp<double>(rng, small_spec());
  DenseAsppBlock<double> severed = dense;
  severed.dense_links = false;
  // Severed layers take only the block input; widen the reduce inputs to match.
  for (auto& layer : severed.layers) {
    layer.reduce.weight = slice(layer.reduce.weight, 1, 0, 4);
  }
  const Tensor<double> x = random_tensor<double>(rng, {1, 4, 12, 12});
  EXPECT_GT(testing::max_abs_diff(dense_aspp_forward(dense, x), dense_aspp_forward(severed, x)),
            0.0);
}

TEST(ReceptiveField, Formula) {
  EXPECT_EQ(receptive_field({KernelTap{3, 1}}), 3u);
  EXPECT_EQ(receptive_field({KernelTap{3, 6}}), 13u);
  EXPECT_EQ(receptive_field({KernelTap{3, 12}}), 25u);
  EXPECT_EQ(receptive_field({KernelTap{3, 18}}), 37u);
  EXPECT_EQ(receptive_field({KernelTap{1, 5}}), 1u);
  EXPECT_EQ(receptive_field({KernelTap{3, 6}, KernelTap{3, 12}}), 37u);
  EXPECT_EQ(dense_chain_receptive_field(kDenseAsppRates), 1u + 2 * (3 + 6 + 12 + 18));
  EXPECT_THROW(receptive_field({KernelTap{4, 1}}), ContractError);
  EXPECT_THROW(receptive_field({KernelTap{3, 0}}), ContractError);
}

}  // namespace
}  // namespace dcd
