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
#include <string>
#include <utility>
#include <vector>

#include "dcd/nn.hpp"

namespace dcd {

inline const std::vector<std::size_t> kDenseAsppRates = {3, 6, 12, 18};
inline const std::vector<std::size_t> kPlainAsppRates = {6, 12, 18};

struct AsppSpec {
  std::size_t in_channels = 256;
  std::size_t inter = 128;         // width after each branch's 1x1 reduction
  std::size_t growth = 64;         // channels each branch contributes
  std::size_t out_channels = 256;  // after the 1x1 projection
  std::vector<std::size_t> rates = kDenseAsppRates;
  // false severs the dense links: every branch then sees only the block input.
  bool dense_links = true;
};

template <typename T>
struct DenseAsppLayer {
  Conv2dLayer<T> reduce;   // 1x1, consumes C_in + l*growth channels
  Conv2dLayer<T> dilated;  // 3x3 at this layer's rate, inter -> growth
};

/// Densely connected atrous pyramid.
///
/// Layer l sees concat[F0 .. F(l-1)] with F0 the block input and computes
///   F_l = relu(conv3x3_dilated(relu(conv1x1(concat[...]))))
/// The projection maps concat[F0 .. F_L] (C_in + L*growth channels) to
/// out_channels, followed by relu.
template <typename T>
struct DenseAsppBlock {
  std::vector<DenseAsppLayer<T>> layers;
  Conv2dLayer<T> project;
  std::size_t in_channels = 0;
  std::size_t growth = 0;
  bool dense_links = true;

  std::size_t pre_projection_channels() const { return in_channels + layers.size() * growth; }
  std::vector<std::size_t> rates() const;

  void collect(const std::string& prefix, ParameterList<T>& out) const;
};

/// Parallel pyramid: 1x1 branch, one 3x3 branch per rate, and an
/// image-pooling branch, all reading the same input, each `growth` wide,
/// then a 1x1 projection and relu.
template <typename T>
struct PlainAsppBlock {
  Conv2dLayer<T> pointwise;
  std::vector<Conv2dLayer<T>> atrous;
  Conv2dLayer<T> image_pool;
  Conv2dLayer<T> project;
  std::size_t growth = 0;

  std::size_t branch_count() const { return atrous.size() + 2; }
  std::size_t pre_projection_channels() const { return branch_count() * growth; }

  void collect(const std::string& prefix, ParameterList<T>& out) const;
};

template <typename T>
DenseAsppBlock<T> make_dense_aspp(Rng& rng, const AsppSpec& spec);
template <typename T>
DenseAsppBlock<T> make_dense_aspp_zeros(const AsppSpec& spec);

template <typename T>
PlainAsppBlock<T> make_plain_aspp(Rng& rng, const AsppSpec& spec);
template <typename T>
PlainAsppBlock<T> make_plain_aspp_zeros(const AsppSpec& spec);

template <typename T>
Tensor<T> dense_aspp_forward(const DenseAsppBlock<T>& block, const Tensor<T>& x);

template <typename T>
Tensor<T> plain_aspp_forward(const PlainAsppBlock<T>& block, const Tensor<T>& x);

struct KernelTap {
  std::size_t kernel = 3;
  std::size_t dilation = 1;
};

// Receptive field of a stride-1 chain of odd kernels: 1 + sum d_i (k_i - 1).
std::size_t receptive_field(const std::vector<KernelTap>& chain);

// Field of the deepest path through a dense block: every rate chained.
std::size_t dense_chain_receptive_field(const std::vector<std::size_t>& rates);

}  // namespace dcd
