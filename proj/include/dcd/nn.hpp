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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  std::size_t stride = 1;
  // Unset means "same": dilation * (kernel - 1) / 2, odd kernels only.
  std::optional<std::size_t> padding;
  bool bias = true;

  std::size_t effective_padding() const;
};

// Weight layout is [out x in x k x k]; bias [out].
template <typename T>
struct Conv2dLayer {
  Tensor<T> weight;
  std::optional<Tensor<T>> bias;
  std::size_t dilation = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel() const { return weight.dim(2); }

  // Zero weights; see init_params for the random initializer.
  static Conv2dLayer zeros(const Conv2dSpec& spec);

  void collect(const std::string& prefix, ParameterList<T>& out) const;
};

// y = x W^T + b with weight [out x in], bias [out].
template <typename T>
struct DenseLayer {
  Tensor<T> weight;
  Tensor<T> bias;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  static DenseLayer zeros(std::size_t in, std::size_t out);

  void collect(const std::string& prefix, ParameterList<T>& out) const;
};

enum class ConvAlgorithm { kDirect, kIm2col };

// Process-wide choice used by conv2d(); im2col+GEMM is the default.
ConvAlgorithm conv_algorithm();
void set_conv_algorithm(ConvAlgorithm algo);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t dilation,
                               std::size_t stride, std::size_t padding);

// Zero-padded cross-correlation over dilated taps. x is [N x C_in x H x W].
template <typename T>
Tensor<T> conv2d(const Conv2dLayer<T>& layer, const Tensor<T>& x);

template <typename T>
Tensor<T> conv2d(const Conv2dLayer<T>& layer, const Tensor<T>& x, ConvAlgorithm algo);

template <typename T>
Tensor<T> dense(const DenseLayer<T>& layer, const Tensor<T>& x);

enum class PoolMode { kAvg, kMax };

// [N x C x H x W] -> [N x C]. Averages are summed in ascending value order,
// which makes both pools exactly invariant under permutations of the pooled
// axis. Max ties resolve to the lowest linear index.
template <typename T>
Tensor<T> global_pool(const Tensor<T>& x, PoolMode mode);

// [N x C x H x W] -> [N x 1 x H x W]
template <typename T>
Tensor<T> channel_pool(const Tensor<T>& x, PoolMode mode);

// Bilinear with half-pixel centres (corner alignment off), edge-clamped.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t factor);

// Concatenates along the channel axis (axis 1) in argument order.
template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> tensors);

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> tensors) {
  std::vector<Tensor<T>> v(tensors);
  return concat<T>(std::span<const Tensor<T>>(v));
}

// He-uniform weights in +-sqrt(6 / fan_in), zero biases.
template <typename T>
Conv2dLayer<T> init_params(Rng& rng, const Conv2dSpec& spec);

template <typename T>
DenseLayer<T> init_dense(Rng& rng, std::size_t in, std::size_t out);

}  // namespace dcd
