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

#include "dcd/cbam.hpp"

#include "dcd/ops.hpp"

namespace dcd {
namespace {

template <typename T>
Tensor<T> shared_mlp(const ChannelAttention<T>& ca, const Tensor<T>& pooled) {
  return dense(ca.mlp_w2, relu(dense(ca.mlp_w1, pooled)));
}

Conv2dSpec spatial_spec() {
  Conv2dSpec spec;
  spec.in_channels = 2;
  spec.out_channels = 1;
  spec.kernel = kSpatialKernel;
  return spec;
}

}  // namespace

std::size_t effective_reduction(std::size_t channels, std::size_t reduction) {
  if (channels == 0 || reduction == 0) throw ContractError("cbam: channels and r must be >= 1");
  const std::size_t r = reduction < channels ? reduction : channels;
  if (channels % r != 0) {
    throw ContractError("cbam: reduction " + std::to_string(r) + " does not divide " +
                        std::to_string(channels) + " channels");
  }
  return r;
}

template <typename T>
void Cbam<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  channel.mlp_w1.collect(prefix + ".mlp1", out);
  channel.mlp_w2.collect(prefix + ".mlp2", out);
  spatial.conv.collect(prefix + ".spatial", out);
}

template <typename T>
Cbam<T> make_cbam(Rng& rng, std::size_t channels, std::size_t reduction) {
  const std::size_t hidden = channels / effective_reduction(channels, reduction);
  Cbam<T> cbam;
  cbam.channel.mlp_w1 = init_dense<T>(rng, channels, hidden);
  cbam.channel.mlp_w2 = init_dense<T>(rng, hidden, channels);
  cbam.spatial.conv = init_params<T>(rng, spatial_spec());
  return cbam;
}

template <typename T>
Cbam<T> make_cbam_zeros(std::size_t channels, std::size_t reduction) {
  const std::size_t hidden = channels / effective_reduction(channels, reduction);
  Cbam<T> cbam;
  cbam.channel.mlp_w1 = DenseLayer<T>::zeros(channels, hidden);
  cbam.channel.mlp_w2 = DenseLayer<T>::zeros(hidden, channels);
  cbam.spatial.conv = Conv2dLayer<T>::zeros(spatial_spec());
  return cbam;
}

template <typename T>
ChannelAttentionOutput<T> channel_attention(const ChannelAttention<T>& ca, const Tensor<T>& f) {
  if (f.rank() != 4 || f.dim(1) != ca.channels()) {
    throw DimensionError("channel_attention: input " + shape_str(f.shape()) + " for " +
                         std::to_string(ca.channels()) + " channels");
  }
  const Tensor<T> avg = shared_mlp(ca, global_pool(f, PoolMode::kAvg));
  const Tensor<T> mx = shared_mlp(ca, global_pool(f, PoolMode::kMax));
  Tensor<T> m_c = sigmoid(add(avg, mx));
  const Tensor<T> gate = reshape(m_c, Shape{f.dim(0), f.dim(1), 1, 1});
  return {m_c, mul(f, gate)};
}

template <typename T>
SpatialAttentionOutput<T> spatial_attention(const SpatialAttention<T>& sa,
                                            const Tensor<T>& f_prime) {
  if (f_prime.rank() != 4 || f_prime.dim(2) == 0 || f_prime.dim(3) == 0) {
    throw DimensionError("spatial_attention: input " + shape_str(f_prime.shape()));
  }
  const Tensor<T> pooled =
      concat<T>({channel_pool(f_prime, PoolMode::kAvg), channel_pool(f_prime, PoolMode::kMax)});
  Tensor<T> m_s = sigmoid(conv2d(sa.conv, pooled));
  return {m_s, mul(f_prime, m_s)};
}

template <typename T>
Tensor<T> cbam_forward(const ChannelAttention<T>& ca, const SpatialAttention<T>& sa,
                       const Tensor<T>& f, AttentionWeights<T>* weights) {
  auto [m_c, f_prime] = channel_attention(ca, f);
  auto [m_s, f_dprime] = spatial_attention(sa, f_prime);
  if (weights != nullptr) *weights = AttentionWeights<T>{m_c, m_s};
  return f_dprime;
}

#define DCD_INSTANTIATE_CBAM(T)                                                              \
  template struct Cbam<T>;                                                                   \
  template Cbam<T> make_cbam<T>(Rng&, std::size_t, std::size_t);                             \
  template Cbam<T> make_cbam_zeros<T>(std::size_t, std::size_t);                             \
  template ChannelAttentionOutput<T> channel_attention<T>(const ChannelAttention<T>&,        \
                                                          const Tensor<T>&);                 \
  template SpatialAttentionOutput<T> spatial_attention<T>(const SpatialAttention<T>&,        \
                                                          const Tensor<T>&);                 \
  template Tensor<T> cbam_forward<T>(const ChannelAttention<T>&, const SpatialAttention<T>&, \
                                     const Tensor<T>&, AttentionWeights<T>*);

DCD_INSTANTIATE_CBAM(float)
DCD_INSTANTIATE_CBAM(double)

}  // namespace dcd
