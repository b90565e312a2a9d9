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

#include <cmath>
#include <functional>

#include "dcd/aspp.hpp"
#include "dcd/cbam.hpp"
#include "dcd/gradcheck.hpp"
#include "dcd/loss.hpp"
#include "dcd/model.hpp"
#include "dcd/nn.hpp"
#include "dcd/ops.hpp"
#include "dcd/rng.hpp"

namespace dcd {
namespace {

using D = double;

Tensor<D> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<D> v(shape_numel(shape));
  for (D& x : v) x = rng.uniform(lo, hi);
  return Tensor<D>(std::move(shape), std::move(v));
}

std::vector<SegMask> random_masks(Rng& rng, std::size_t n, std::size_t h, std::size_t w,
                                  std::size_t classes) {
  std::vector<SegMask> out;
  for (std::size_t i = 0; i < n; ++i) {
    SegMask m(h, w);
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.below(classes));
    out.push_back(std::move(m));
  }
  return out;
}

// Fresh random values in every parameter, biases included.
void randomize(Rng& rng, ParameterList<D>& params, double scale = 0.5) {
  for (auto& p : params) {
    for (D& x : p.tensor.mutable_data()) x = rng.uniform(-scale, scale);
  }
}

std::vector<Tensor<D>> tensors_of(const ParameterList<D>& params) {
  std::vector<Tensor<D>> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// sum(y * r) with a fixed random r of y's shape.
std::function<Tensor<D>()> contracted(Rng& rng, const Shape& out_shape,
                                      std::function<Tensor<D>()> f) {
  const Tensor<D> r = random_tensor(rng, out_shape);
  return [f = std::move(f), r] { return sum_all(mul(f(), r)); };
}

Conv2dLayer<D> random_conv(Rng& rng, Conv2dSpec spec) {
  Conv2dLayer<D> layer = init_params<D>(rng, spec);
  if (layer.bias) {
    for (D& b : layer.bias->mutable_data()) b = rng.uniform(-0.2, 0.2);
  }
  return layer;
}

}  // namespace

std::vector<GradSuiteCase> run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  std::vector<GradSuiteCase> cases;
  auto run = [&](std::string name, const std::function<Tensor<D>()>& f,
                 std::vector<Tensor<D>> wrt, std::size_t cap = 0) {
    GradCheckOptions options;
    options.max_coords_per_tensor = cap;
    options.denominator_floor = kGradSuiteFloor;
    GradSuiteCase c{std::move(name), grad_check(f, std::move(wrt), options), false};
    c.passed = c.result.max_rel_error <= tolerance;
    cases.push_back(std::move(c));
  };

  // Elementwise and algebraic ops.
  {
    const Tensor<D> a = random_tensor(rng, {2, 3, 4});
    const Tensor<D> b = random_tensor(rng, {2, 1, 4}, 0.5, 1.5);
    run("add/sub/mul/div broadcast",
        contracted(rng, {2, 3, 4}, [a, b] { return div(mul(add(a, b), sub(a, b)), b); }), {a, b});
    run("sigmoid", contracted(rng, {2, 3, 4}, [a] { return sigmoid(a); }), {a});
    run("relu", contracted(rng, {2, 3, 4}, [a] { return relu(a); }), {a});
    run("softmax axis 1", contracted(rng, {2, 3, 4}, [a] { return softmax(a, 1); }), {a});
    const Tensor<D> m1 = random_tensor(rng, {3, 5});
    const Tensor<D> m2 = random_tensor(rng, {5, 2});
    run("matmul", contracted(rng, {3, 2}, [m1, m2] { return matmul(m1, m2); }), {m1, m2});
    run("reduce sum/mean/max",
        [a] {
          return add(sum_all(reduce(Reduction::kMax, a, {1}, false)),
                     sum_all(mul(reduce(Reduction::kMean, a, {0, 2}, true),
                                 reduce(Reduction::kSum, a, {0, 2}, true))));
        },
        {a});
  }

  // Convolution at every dilation rate used anywhere in the network.
  for (std::size_t d : {1u, 2u, 3u, 6u, 12u, 18u}) {
    Conv2dLayer<D> layer = random_conv(rng, Conv2dSpec{2, 3, 3, d, 1, std::nullopt, true});
    const Tensor<D> x = random_tensor(rng, {2, 2, 9, 9});
    ParameterList<D> params;
    layer.collect("conv", params);
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(x);
    run("conv2d 3x3 dilation " + std::to_string(d),
        contracted(rng, {2, 3, 9, 9}, [layer, x] { return conv2d(layer, x); }), wrt);
  }
  {
    Conv2dLayer<D> layer = random_conv(rng, Conv2dSpec{2, 3, 3, 1, 2, std::nullopt, true});
    const Tensor<D> x = random_tensor(rng, {1, 2, 8, 8});
    ParameterList<D> params;
    layer.collect("conv", params);
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(x);
    run("conv2d 3x3 stride 2",
        contracted(rng, {1, 3, 4, 4}, [layer, x] { return conv2d(layer, x); }), wrt);
    run("conv2d 3x3 stride 2 direct",
        contracted(rng, {1, 3, 4, 4},
                   [layer, x] { return conv2d(layer, x, ConvAlgorithm::kDirect); }),
        wrt);
  }
  {
    Conv2dLayer<D> layer = random_conv(rng, Conv2dSpec{3, 2, 1, 1, 1, std::nullopt, true});
    const Tensor<D> x = random_tensor(rng, {2, 3, 5, 5});
    ParameterList<D> params;
    layer.collect("conv", params);
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(x);
    run("conv2d 1x1", contracted(rng, {2, 2, 5, 5}, [layer, x] { return conv2d(layer, x); }), wrt);
  }
  {
    DenseLayer<D> layer = init_dense<D>(rng, 4, 3);
    for (D& b : layer.bias.mutable_data()) b = rng.uniform(-0.2, 0.2);
    const Tensor<D> x = random_tensor(rng, {2, 4});
    run("dense", contracted(rng, {2, 3}, [layer, x] { return dense(layer, x); }),
        {layer.weight, layer.bias, x});
  }

  // Pooling, resampling, concatenation.
  {
    const Tensor<D> x = random_tensor(rng, {2, 3, 4, 5});
    run("global avg pool",
        contracted(rng, {2, 3}, [x] { return global_pool(x, PoolMode::kAvg); }), {x});
    run("global max pool",
        contracted(rng, {2, 3}, [x] { return global_pool(x, PoolMode::kMax); }), {x});
    run("channel avg pool",
        contracted(rng, {2, 1, 4, 5}, [x] { return channel_pool(x, PoolMode::kAvg); }), {x});
    run("channel max pool",
        contracted(rng, {2, 1, 4, 5}, [x] { return channel_pool(x, PoolMode::kMax); }), {x});
    run("upsample bilinear x2",
        contracted(rng, {2, 3, 8, 10}, [x] { return upsample_bilinear(x, 2); }), {x});
    run("upsample bilinear x4",
        contracted(rng, {2, 3, 16, 20}, [x] { return upsample_bilinear(x, 4); }), {x});
    const Tensor<D> y = random_tensor(rng, {2, 2, 4, 5});
    run("concat channels", contracted(rng, {2, 5, 4, 5}, [x, y] { return concat<D>({x, y}); }),
        {x, y});
  }

  // Attention.
  {
    Cbam<D> cbam = make_cbam<D>(rng, 8, 2);
    ParameterList<D> params;
    cbam.collect("cbam", params);
    randomize(rng, params, 0.6);
    const Tensor<D> f = random_tensor(rng, {2, 8, 6, 6});
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(f);
    run("cbam full", contracted(rng, {2, 8, 6, 6}, [cbam, f] { return cbam_forward(cbam, f); }),
        wrt);
  }

  // Pyramids.
  {
    AsppSpec spec;
    spec.in_channels = 3;
    spec.inter = 4;
    spec.growth = 2;
    spec.out_channels = 3;
    DenseAsppBlock<D> block = make_dense_aspp<D>(rng, spec);
    ParameterList<D> params;
    block.collect("aspp", params);
    randomize(rng, params, 0.5);
    const Tensor<D> x = random_tensor(rng, {1, 3, 8, 8});
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(x);
    run("dense aspp full",
        contracted(rng, {1, 3, 8, 8}, [block, x] { return dense_aspp_forward(block, x); }), wrt);

    spec.rates = kPlainAsppRates;
    PlainAsppBlock<D> plain = make_plain_aspp<D>(rng, spec);
    ParameterList<D> pparams;
    plain.collect("aspp", pparams);
    randomize(rng, pparams, 0.5);
    std::vector<Tensor<D>> pwrt = tensors_of(pparams);
    pwrt.push_back(x);
    run("plain aspp full",
        contracted(rng, {1, 3, 8, 8}, [plain, x] { return plain_aspp_forward(plain, x); }), pwrt);
  }

  // Losses.
  {
    const Tensor<D> logits = random_tensor(rng, {2, 14, 5, 5}, -2.0, 2.0);
    const auto masks = random_masks(rng, 2, 5, 5, 14);
    run("cross entropy", [logits, masks] { return ce_loss(logits, std::span<const SegMask>(masks)); },
        {logits});
    run("soft dice", [logits, masks] { return dice_loss(logits, std::span<const SegMask>(masks)); },
        {logits});
    run("total loss",
        [logits, masks] { return total_loss(logits, std::span<const SegMask>(masks)); }, {logits});
  }

  // Whole network on a 16 x 16 input, loss included.
  {
    ModelConfig cfg;
    cfg.backbone_widths = {4, 8, 8, 8};
    cfg.stage_depth = 1;
    cfg.cbam_reduction = 2;
    cfg.aspp_inter = 4;
    cfg.aspp_growth = 2;
    cfg.aspp_out = 4;
    cfg.shallow_channels = 4;
    cfg.decoder_width = 4;
    cfg.input_size = 16;
    DcdModel<D> model = make_model<D>(cfg, rng);
    ParameterList<D> params = model.parameters();
    randomize(rng, params, 0.4);
    const Tensor<D> x = random_tensor(rng, {1, 1, 16, 16}, 0.0, 1.0);
    const auto masks = random_masks(rng, 1, 16, 16, 14);
    std::vector<Tensor<D>> wrt = tensors_of(params);
    wrt.push_back(x);
    run("dcd forward + total loss 16x16",
        [model, x, masks] { return total_loss(forward(model, x), std::span<const SegMask>(masks)); },
        wrt, 24);
  }
  return cases;
}

}  // namespace dcd
