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

#include "dcd/aspp.hpp"

#include "dcd/ops.hpp"

namespace dcd {
namespace {

Conv2dSpec pointwise_spec(std::size_t in, std::size_t out) {
  Conv2dSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = 1;
  return s;
}

Conv2dSpec atrous_spec(std::size_t in, std::size_t out, std::size_t rate) {
  Conv2dSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = 3;
  s.dilation = rate;
  return s;
}

void validate(const AsppSpec& spec) {
  if (spec.in_channels == 0 || spec.inter == 0 || spec.growth == 0 || spec.out_channels == 0) {
    throw ContractError("aspp: channel widths must be positive");
  }
  if (spec.rates.empty()) throw ContractError("aspp: at least one dilation rate is required");
  for (std::size_t r : spec.rates) {
    if (r == 0) throw ContractError("aspp: dilation rates must be >= 1");
  }
}

// `make` is called as make(spec) for every conv so zero and random
// construction share the layer plan.
template <typename T, typename Make>
DenseAsppBlock<T> build_dense(const AsppSpec& spec, Make&& make) {
  validate(spec);
  DenseAsppBlock<T> block;
  block.in_channels = spec.in_channels;
  block.growth = spec.growth;
  block.dense_links = spec.dense_links;
  for (std::size_t l = 0; l < spec.rates.size(); ++l) {
    const std::size_t consumed = spec.dense_links ? spec.in_channels + l * spec.growth
                                                  : spec.in_channels;
    DenseAsppLayer<T> layer;
    layer.reduce = make(pointwise_spec(consumed, spec.inter));
    layer.dilated = make(atrous_spec(spec.inter, spec.growth, spec.rates[l]));
    block.layers.push_back(std::move(layer));
  }
  block.project = make(pointwise_spec(block.pre_projection_channels(), spec.out_channels));
  // Channel bookkeeping must agree with the dense-concat definition.
  for (std::size_t l = 0; l < block.layers.size(); ++l) {
    const std::size_t expect = spec.dense_links ? spec.in_channels + l * spec.growth
                                                : spec.in_channels;
    if (block.layers[l].reduce.in_channels() != expect) {
      throw ContractError("dense aspp: layer " + std::to_string(l) + " width mismatch");
    }
  }
  if (block.project.in_channels() != spec.in_channels + spec.rates.size() * spec.growth) {
    throw ContractError("dense aspp: projection width mismatch");
  }
  return block;
}

template <typename T, typename Make>
PlainAsppBlock<T> build_plain(const AsppSpec& spec, Make&& make) {
  validate(spec);
  PlainAsppBlock<T> block;
  block.growth = spec.growth;
  block.pointwise = make(pointwise_spec(spec.in_channels, spec.growth));
  for (std::size_t r : spec.rates) {
    block.atrous.push_back(make(atrous_spec(spec.in_channels, spec.growth, r)));
  }
  block.image_pool = make(pointwise_spec(spec.in_channels, spec.growth));
  block.project = make(pointwise_spec(block.pre_projection_channels(), spec.out_channels));
  return block;
}

template <typename T>
void check_input(const Tensor<T>& x, std::size_t channels, const char* who) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw DimensionError(std::string(who) + ": input " + shape_str(x.shape()) + " expected " +
                         std::to_string(channels) + " channels");
  }
}

}  // namespace

template <typename T>
std::vector<std::size_t> DenseAsppBlock<T>::rates() const {
  std::vector<std::size_t> out;
  for (const auto& l : layers) out.push_back(l.dilated.dilation);
  return out;
}

template <typename T>
void DenseAsppBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    layers[l].reduce.collect(p + ".reduce", out);
    layers[l].dilated.collect(p + ".dilated", out);
  }
  project.collect(prefix + ".project", out);
}

template <typename T>
void PlainAsppBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  pointwise.collect(prefix + ".pointwise", out);
  for (std::size_t i = 0; i < atrous.size(); ++i) {
    atrous[i].collect(prefix + ".atrous" + std::to_string(i), out);
  }
  image_pool.collect(prefix + ".image_pool", out);
  project.collect(prefix + ".project", out);
}

template <typename T>
DenseAsppBlock<T> make_dense_aspp(Rng& rng, const AsppSpec& spec) {
  return build_dense<T>(spec, [&](const Conv2dSpec& s) { return init_params<T>(rng, s); });
}

template <typename T>
DenseAsppBlock<T> make_dense_aspp_zeros(const AsppSpec& spec) {
  return build_dense<T>(spec, [](const Conv2dSpec& s) { return Conv2dLayer<T>::zeros(s); });
}

template <typename T>
PlainAsppBlock<T> make_plain_aspp(Rng& rng, const AsppSpec& spec) {
  return build_plain<T>(spec, [&](const Conv2dSpec& s) { return init_params<T>(rng, s); });
}

template <typename T>
PlainAsppBlock<T> make_plain_aspp_zeros(const AsppSpec& spec) {
  return build_plain<T>(spec, [](const Conv2dSpec& s) { return Conv2dLayer<T>::zeros(s); });
}

template <typename T>
Tensor<T> dense_aspp_forward(const DenseAsppBlock<T>& block, const Tensor<T>& x) {
  check_input(x, block.in_channels, "dense_aspp_forward");
  std::vector<Tensor<T>> features{x};
  for (const auto& layer : block.layers) {
    const Tensor<T> input =
        block.dense_links ? concat<T>(std::span<const Tensor<T>>(features)) : x;
    const Tensor<T> reduced = relu(conv2d(layer.reduce, input));
    features.push_back(relu(conv2d(layer.dilated, reduced)));
  }
  return relu(conv2d(block.project, concat<T>(std::span<const Tensor<T>>(features))));
}

template <typename T>
Tensor<T> plain_aspp_forward(const PlainAsppBlock<T>& block, const Tensor<T>& x) {
  check_input(x, block.pointwise.in_channels(), "plain_aspp_forward");
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  std::vector<Tensor<T>> branches;
  branches.push_back(relu(conv2d(block.pointwise, x)));
  for (const auto& conv : block.atrous) branches.push_back(relu(conv2d(conv, x)));
  const Tensor<T> pooled = reshape(global_pool(x, PoolMode::kAvg), Shape{n, c, 1, 1});
  const Tensor<T> image = relu(conv2d(block.image_pool, pooled));
  const Tensor<T> canvas(Shape{n, block.growth, x.dim(2), x.dim(3)});
  branches.push_back(add(canvas, image));
  return relu(conv2d(block.project, concat<T>(std::span<const Tensor<T>>(branches))));
}

std::size_t receptive_field(const std::vector<KernelTap>& chain) {
  std::size_t rf = 1;
  for (const auto& tap : chain) {
    if (tap.kernel == 0 || tap.kernel % 2 == 0) {
      throw ContractError("receptive_field: kernel " + std::to_string(tap.kernel) +
                          " is not odd");
    }
    if (tap.dilation == 0) throw ContractError("receptive_field: dilation must be >= 1");
    rf += tap.dilation * (tap.kernel - 1);
  }
  return rf;
}

std::size_t dense_chain_receptive_field(const std::vector<std::size_t>& rates) {
  std::vector<KernelTap> chain;
  for (std::size_t r : rates) chain.push_back({3, r});
  return receptive_field(chain);
}

#define DCD_INSTANTIATE_ASPP(T)                                                     \
  template struct DenseAsppBlock<T>;                                                \
  template struct PlainAsppBlock<T>;                                                \
  template DenseAsppBlock<T> make_dense_aspp<T>(Rng&, const AsppSpec&);             \
  template DenseAsppBlock<T> make_dense_aspp_zeros<T>(const AsppSpec&);             \
  template PlainAsppBlock<T> make_plain_aspp<T>(Rng&, const AsppSpec&);             \
  template PlainAsppBlock<T> make_plain_aspp_zeros<T>(const AsppSpec&);             \
  template Tensor<T> dense_aspp_forward<T>(const DenseAsppBlock<T>&, const Tensor<T>&); \
  template Tensor<T> plain_aspp_forward<T>(const PlainAsppBlock<T>&, const Tensor<T>&);

DCD_INSTANTIATE_ASPP(float)
DCD_INSTANTIATE_ASPP(double)

}  // namespace dcd
