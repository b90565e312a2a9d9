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

#include "dcd/nn.hpp"

// Convolutional block attention: channel gating followed by spatial gating.
namespace dcd {

// Shared two-layer MLP over the pooled channel descriptors, C -> C/r -> C.
template <typename T>
struct ChannelAttention {
  DenseLayer<T> mlp_w1;
  DenseLayer<T> mlp_w2;

  std::size_t channels() const { return mlp_w1.in_features(); }
  std::size_t reduction() const { return channels() / mlp_w1.out_features(); }
};

// 7x7 same-padded convolution over [channel-avg, channel-max], 2 -> 1.
template <typename T>
struct SpatialAttention {
  Conv2dLayer<T> conv;
};

template <typename T>
struct AttentionWeights {
  Tensor<T> m_c;  // [N x C]
  Tensor<T> m_s;  // [N x 1 x H x W]
};

template <typename T>
struct Cbam {
  ChannelAttention<T> channel;
  SpatialAttention<T> spatial;

  void collect(const std::string& prefix, ParameterList<T>& out) const;
};

inline constexpr std::size_t kSpatialKernel = 7;

// Reduction actually used for `channels`: min(r, C). Throws ContractError
// when it does not divide C.
std::size_t effective_reduction(std::size_t channels, std::size_t reduction);

template <typename T>
Cbam<T> make_cbam(Rng& rng, std::size_t channels, std::size_t reduction);

template <typename T>
Cbam<T> make_cbam_zeros(std::size_t channels, std::size_t reduction);

template <typename T>
struct ChannelAttentionOutput {
  Tensor<T> m_c;
  Tensor<T> f_prime;
};

template <typename T>
struct SpatialAttentionOutput {
  Tensor<T> m_s;
  Tensor<T> f_dprime;
};

// m_c = sigmoid(MLP(gap(F)) + MLP(gmp(F))), F' = m_c * F
template <typename T>
ChannelAttentionOutput<T> channel_attention(const ChannelAttention<T>& ca, const Tensor<T>& f);

// m_s = sigmoid(conv7x7([avg_c F', max_c F'])), F'' = m_s * F'
template <typename T>
SpatialAttentionOutput<T> spatial_attention(const SpatialAttention<T>& sa,
                                            const Tensor<T>& f_prime);

template <typename T>
Tensor<T> cbam_forward(const ChannelAttention<T>& ca, const SpatialAttention<T>& sa,
                       const Tensor<T>& f, AttentionWeights<T>* weights = nullptr);

template <typename T>
Tensor<T> cbam_forward(const Cbam<T>& cbam, const Tensor<T>& f,
                       AttentionWeights<T>* weights = nullptr) {
  return cbam_forward(cbam.channel, cbam.spatial, f, weights);
}

}  // namespace dcd
