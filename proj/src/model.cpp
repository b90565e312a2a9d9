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

#include "dcd/model.hpp"

#include "dcd/ops.hpp"

namespace dcd {
namespace {

Conv2dSpec conv_spec(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1) {
  Conv2dSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = k;
  s.stride = stride;
  return s;
}

AsppSpec aspp_spec(const ModelConfig& c) {
  AsppSpec s;
  s.in_channels = c.backbone_widths.back();
  s.inter = c.aspp_inter;
  s.growth = c.aspp_growth;
  s.out_channels = c.aspp_out;
  s.rates = c.dilation_rates;
  return s;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_classes < 2) throw ContractError("config: num_classes must be >= 2");
  if (num_classes > kMaxClassIndex + 1u) {
    throw ContractError("config: num_classes must be <= " + std::to_string(kMaxClassIndex + 1));
  }
  if (in_channels == 0) throw ContractError("config: in_channels must be >= 1");
  if (backbone_widths.size() != 4) {
    throw ContractError("config: backbone_widths needs exactly 4 stages");
  }
  for (std::size_t w : backbone_widths) {
    if (w == 0) throw ContractError("config: backbone widths must be positive");
  }
  if (stage_depth == 0) throw ContractError("config: stage_depth must be >= 1");
  if (dilation_rates.empty()) throw ContractError("config: dilation_rates is empty");
  for (std::size_t r : dilation_rates) {
    if (r == 0) throw ContractError("config: dilation rates must be >= 1");
  }
  if (aspp_inter == 0 || aspp_growth == 0 || aspp_out == 0 || shallow_channels == 0 ||
      decoder_width == 0) {
    throw ContractError("config: channel widths must be positive");
  }
  if (input_size == 0 || input_size % kDeepStride != 0) {
    throw ContractError("config: input_size must be a positive multiple of 16");
  }
  if (attention) effective_reduction(backbone_widths[1], cbam_reduction);
}

template <typename T>
DcdModel<T> make_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  Rng enc_rng = rng.fork();
  Rng cbam_rng = rng.fork();
  Rng aspp_rng = rng.fork();
  Rng dec_rng = rng.fork();

  DcdModel<T> m;
  m.config = config;
  std::size_t in = config.in_channels;
  for (std::size_t w : config.backbone_widths) {
    std::vector<Conv2dLayer<T>> stage;
    stage.push_back(init_params<T>(enc_rng, conv_spec(in, w, 3, 2)));
    for (std::size_t d = 1; d < config.stage_depth; ++d) {
      stage.push_back(init_params<T>(enc_rng, conv_spec(w, w, 3)));
    }
    m.stages.push_back(std::move(stage));
    in = w;
  }
  const std::size_t shallow_width = config.backbone_widths[1];
  if (config.attention) {
    m.cbam = make_cbam<T>(cbam_rng, shallow_width, config.cbam_reduction);
  }
  if (config.aspp_mode == AsppMode::kDense) {
    m.dense_aspp = make_dense_aspp<T>(aspp_rng, aspp_spec(config));
  } else {
    m.plain_aspp = make_plain_aspp<T>(aspp_rng, aspp_spec(config));
  }
  m.shallow_proj = init_params<T>(dec_rng, conv_spec(shallow_width, config.shallow_channels, 1));
  m.decoder0 = init_params<T>(
      dec_rng, conv_spec(config.shallow_channels + config.aspp_out, config.decoder_width, 3));
  m.decoder1 = init_params<T>(dec_rng, conv_spec(config.decoder_width, config.decoder_width, 3));
  m.classifier = init_params<T>(dec_rng, conv_spec(config.decoder_width, config.num_classes, 1));
  return m;
}

template <typename T>
ParameterList<T> DcdModel<T>::parameters() const {
  ParameterList<T> out;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (std::size_t c = 0; c < stages[s].size(); ++c) {
      stages[s][c].collect("encoder.stage" + std::to_string(s) + ".conv" + std::to_string(c), out);
    }
  }
  if (cbam) cbam->collect("cbam", out);
  if (dense_aspp) dense_aspp->collect("aspp", out);
  if (plain_aspp) plain_aspp->collect("aspp", out);
  shallow_proj.collect("decoder.shallow", out);
  decoder0.collect("decoder.conv0", out);
  decoder1.collect("decoder.conv1", out);
  classifier.collect("classifier", out);
  return out;
}

template <typename T>
std::size_t DcdModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

template <typename T>
Tensor<T> forward(const DcdModel<T>& model, const Tensor<T>& x) {
  const ModelConfig& c = model.config;
  if (x.rank() != 4 || x.dim(1) != c.in_channels) {
    throw DimensionError("forward: input " + shape_str(x.shape()) + " expected N x " +
                         std::to_string(c.in_channels) + " x H x W");
  }
  if (x.dim(2) == 0 || x.dim(3) == 0 || x.dim(2) % kDeepStride != 0 ||
      x.dim(3) % kDeepStride != 0) {
    throw ContractError("forward: spatial size " + shape_str(x.shape()) +
                        " is not a multiple of 16");
  }
  Tensor<T> h = x;
  Tensor<T> shallow;
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    for (const auto& conv : model.stages[s]) h = relu(conv2d(conv, h));
    if (s == 1) shallow = h;
  }
  const Tensor<T> pyramid = model.dense_aspp ? dense_aspp_forward(*model.dense_aspp, h)
                                             : plain_aspp_forward(*model.plain_aspp, h);
  const Tensor<T> deep_up = upsample_bilinear(pyramid, kDeepStride / kShallowStride);
  if (model.cbam) shallow = cbam_forward(*model.cbam, shallow);
  const Tensor<T> skip = relu(conv2d(model.shallow_proj, shallow));
  Tensor<T> d = concat<T>({skip, deep_up});
  d = relu(conv2d(model.decoder0, d));
  d = relu(conv2d(model.decoder1, d));
  return upsample_bilinear(conv2d(model.classifier, d), kShallowStride);
}

template <typename T>
std::vector<SegMask> argmax_masks(const Tensor<T>& logits) {
  if (logits.rank() != 4) {
    throw DimensionError("argmax_masks: expects N x C x H x W, got " + shape_str(logits.shape()));
  }
  const Tensor<T> prob = [&] {
    NoGradScope<T> no_grad;
    return softmax(logits, 1);
  }();
  const std::size_t n = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  const std::size_t h = logits.dim(2);
  const std::size_t w = logits.dim(3);
  const std::size_t plane = h * w;
  const auto p = prob.data();
  std::vector<SegMask> masks;
  for (std::size_t b = 0; b < n; ++b) {
    SegMask mask(h, w);
    for (std::size_t i = 0; i < plane; ++i) {
      std::size_t best = 0;
      T best_p = p[b * classes * plane + i];
      for (std::size_t c = 1; c < classes; ++c) {
        const T v = p[(b * classes + c) * plane + i];
        if (v > best_p) {
          best_p = v;
          best = c;
        }
      }
      mask.labels[i] = static_cast<std::uint8_t>(best);
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

template <typename T>
std::vector<SegMask> predict(const DcdModel<T>& model, const Tensor<T>& x) {
  NoGradScope<T> no_grad;
  return argmax_masks(forward(model, x));
}

std::size_t parameter_count(const ModelConfig& config) {
  Rng rng(0);
  return make_model<float>(config, rng).parameter_count();
}

#define DCD_INSTANTIATE_MODEL(T)                                                 \
  template struct DcdModel<T>;                                                   \
  template DcdModel<T> make_model<T>(const ModelConfig&, Rng&);                  \
  template Tensor<T> forward<T>(const DcdModel<T>&, const Tensor<T>&);           \
  template std::vector<SegMask> argmax_masks<T>(const Tensor<T>&);               \
  template std::vector<SegMask> predict<T>(const DcdModel<T>&, const Tensor<T>&);

DCD_INSTANTIATE_MODEL(float)
DCD_INSTANTIATE_MODEL(double)

}  // namespace dcd
