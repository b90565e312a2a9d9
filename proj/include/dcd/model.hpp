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
#include <string>
#include <vector>

#include "dcd/aspp.hpp"
#include "dcd/cbam.hpp"
#include "dcd/nn.hpp"
#include "dcd/seg_mask.hpp"

namespace dcd {

enum class AsppMode { kDense, kPlain };

struct ModelConfig {
  std::size_t num_classes = 14;
  std::size_t in_channels = 1;
  // Four stride-2 stages; stage 2 (stride 4) feeds the shallow path and
  // stage 4 (stride 16) the pyramid.
  std::vector<std::size_t> backbone_widths = {32, 64, 128, 256};
  // Convolutions per stage: one strided, the rest stride 1.
  std::size_t stage_depth = 2;
  bool attention = true;
  AsppMode aspp_mode = AsppMode::kDense;
  std::vector<std::size_t> dilation_rates = kDenseAsppRates;
  std::size_t aspp_inter = 128;
  std::size_t aspp_growth = 64;
  std::size_t aspp_out = 256;
  std::size_t cbam_reduction = 16;
  std::size_t shallow_channels = 48;
  std::size_t decoder_width = 64;
  std::size_t input_size = 64;

  // Throws ContractError on an unusable combination.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Output stride of the deep path.
inline constexpr std::size_t kDeepStride = 16;
inline constexpr std::size_t kShallowStride = 4;

template <typename T>
struct DcdModel {
  ModelConfig config;
  std::vector<std::vector<Conv2dLayer<T>>> stages;
  std::optional<Cbam<T>> cbam;
  std::optional<DenseAsppBlock<T>> dense_aspp;
  std::optional<PlainAsppBlock<T>> plain_aspp;
  Conv2dLayer<T> shallow_proj;
  Conv2dLayer<T> decoder0;
  Conv2dLayer<T> decoder1;
  Conv2dLayer<T> classifier;

  // Parameters in a fixed order with stable names; the tensors share
  // storage with the model.
  ParameterList<T> parameters() const;
  std::size_t parameter_count() const;
};

// Each component draws from its own forked stream, so toggling attention or
// the pyramid variant leaves every other initial weight unchanged.
template <typename T>
DcdModel<T> make_model(const ModelConfig& config, Rng& rng);

template <typename T>
DcdModel<T> make_model(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return make_model<T>(config, rng);
}

// [N x C_img x H x W] -> logits [N x num_classes x H x W]; H, W multiples of 16.
template <typename T>
Tensor<T> forward(const DcdModel<T>& model, const Tensor<T>& x);

// Per-pixel argmax of softmax(logits) over classes, ties to the lowest index.
template <typename T>
std::vector<SegMask> argmax_masks(const Tensor<T>& logits);

template <typename T>
std::vector<SegMask> predict(const DcdModel<T>& model, const Tensor<T>& x);

// Parameter count implied by a configuration.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace dcd
