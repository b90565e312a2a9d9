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

#include "dcd/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "dcd/kernels/kernels.hpp"
#include "dcd/ops.hpp"

namespace dcd {
namespace {

std::atomic<ConvAlgorithm> g_conv_algorithm{ConvAlgorithm::kIm2col};

struct ConvGeometry {
  std::size_t n, c_in, h, w;
  std::size_t c_out, k, dilation, stride, padding;
  std::size_t h_out, w_out;

  std::size_t taps() const { return c_in * k * k; }
  std::size_t plane_out() const { return h_out * w_out; }
  std::size_t columns() const { return n * plane_out(); }
};

template <typename T>
ConvGeometry conv_geometry(const Conv2dLayer<T>& layer, const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw DimensionError("conv2d: input must be NxCxHxW, got " + shape_str(x.shape()));
  }
  if (layer.weight.rank() != 4 || layer.weight.dim(2) != layer.weight.dim(3)) {
    throw DimensionError("conv2d: weight must be [out x in x k x k], got " +
                         shape_str(layer.weight.shape()));
  }
  if (layer.dilation < 1 || layer.stride < 1) {
    throw ContractError("conv2d: dilation and stride must be >= 1");
  }
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c_in = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.c_out = layer.out_channels();
  g.k = layer.kernel();
  g.dilation = layer.dilation;
  g.stride = layer.stride;
  g.padding = layer.padding;
  if (g.c_in != layer.in_channels()) {
    throw DimensionError("conv2d: input has " + std::to_string(g.c_in) +
                         " channels, layer expects " + std::to_string(layer.in_channels()));
  }
  if (layer.bias && (layer.bias->rank() != 1 || layer.bias->dim(0) != g.c_out)) {
    throw DimensionError("conv2d: bias shape " + shape_str(layer.bias->shape()));
  }
  const std::size_t span = g.dilation * (g.k - 1) + 1;
  if (span > g.h + 2 * g.padding || span > g.w + 2 * g.padding) {
    throw DimensionError("conv2d: dilated kernel extent " + std::to_string(span) +
                         " exceeds padded input " + shape_str(x.shape()));
  }
  g.h_out = conv_output_extent(g.h, g.k, g.dilation, g.stride, g.padding);
  g.w_out = conv_output_extent(g.w, g.k, g.dilation, g.stride, g.padding);
  return g;
}

// Output positions o in [lo, hi) whose input tap o*stride - pad + off lies in [0, extent).
struct TapRange {
  std::size_t lo, hi;
};

TapRange valid_outputs(std::size_t out_extent, std::size_t in_extent, std::size_t stride,
                       std::size_t padding, std::size_t offset) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto shift = static_cast<std::ptrdiff_t>(offset) - static_cast<std::ptrdiff_t>(padding);
  // need o*s + shift >= 0 and o*s + shift <= in_extent - 1
  std::ptrdiff_t lo = 0;
  if (shift < 0) lo = (-shift + s - 1) / s;
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(in_extent) - 1 - shift;
  std::ptrdiff_t hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// col[(c*k + ky)*k + kx][n*plane + oy*w_out + ox]
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t cols = g.columns();
  const std::size_t plane = g.plane_out();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const TapRange ry = valid_outputs(g.h_out, g.h, g.stride, g.padding, ky * g.dilation);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const TapRange rx = valid_outputs(g.w_out, g.w, g.stride, g.padding, kx * g.dilation);
        T* row = col + ((c * g.k + ky) * g.k + kx) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* src = x + (n * g.c_in + c) * g.h * g.w;
          T* dst = row + n * plane;
          std::fill_n(dst, plane, T(0));
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.stride + ky * g.dilation - g.padding;
            const T* srow = src + iy * g.w;
            T* drow = dst + oy * g.w_out;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              drow[ox] = srow[ox * g.stride + kx * g.dilation - g.padding];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* gx) {
  const std::size_t cols = g.columns();
  const std::size_t plane = g.plane_out();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const TapRange ry = valid_outputs(g.h_out, g.h, g.stride, g.padding, ky * g.dilation);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const TapRange rx = valid_outputs(g.w_out, g.w, g.stride, g.padding, kx * g.dilation);
        const T* row = col + ((c * g.k + ky) * g.k + kx) * cols;
        for (std::size_t n = 0; n < g.n; ++n) {
          T* dst = gx + (n * g.c_in + c) * g.h * g.w;
          const T* src = row + n * plane;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.stride + ky * g.dilation - g.padding;
            T* drow = dst + iy * g.w;
            const T* srow = src + oy * g.w_out;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              drow[ox * g.stride + kx * g.dilation - g.padding] += srow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_forward_im2col(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t taps = g.taps();
  const std::size_t cols = g.columns();
  const std::size_t plane = g.plane_out();
  std::vector<T> col(taps * cols);
  im2col(g, x, col.data());
  std::vector<T> out(g.c_out * cols);
  kernels::gemm(g.c_out, cols, taps, w, taps, col.data(), cols, out.data(), cols, false);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const T b = bias != nullptr ? bias[co] : T(0);
      const T* src = out.data() + co * cols + n * plane;
      T* dst = y + (n * g.c_out + co) * plane;
      for (std::size_t j = 0; j < plane; ++j) dst[j] = src[j] + b;
    }
  }
}

template <typename T>
void conv_backward_im2col(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* gx,
                          T* gw, T* gb) {
  const std::size_t taps = g.taps();
  const std::size_t cols = g.columns();
  const std::size_t plane = g.plane_out();
  // gy regrouped as [c_out x (n * plane)]
  std::vector<T> gmat(g.c_out * cols);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      std::copy_n(gy + (n * g.c_out + co) * plane, plane, gmat.data() + co * cols + n * plane);
    }
  }
  if (gb != nullptr) {
    for (std::size_t co = 0; co < g.c_out; ++co) gb[co] += kernels::sum(cols, gmat.data() + co * cols);
  }
  if (gw != nullptr) {
    std::vector<T> col(taps * cols);
    im2col(g, x, col.data());
    std::vector<T> col_t(cols * taps);
    kernels::transpose(taps, cols, col.data(), col_t.data());
    kernels::gemm(g.c_out, taps, cols, gmat.data(), cols, col_t.data(), taps, gw, taps, true);
  }
  if (gx != nullptr) {
    std::vector<T> w_t(taps * g.c_out);
    kernels::transpose(g.c_out, taps, w, w_t.data());
    std::vector<T> dcol(taps * cols);
    kernels::gemm(taps, cols, g.c_out, w_t.data(), g.c_out, gmat.data(), cols, dcol.data(), cols,
                  false);
    col2im_add(g, dcol.data(), gx);
  }
}

// Reference path: straightforward loops, innermost over a contiguous output row.
template <typename T>
void conv_forward_direct(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t plane = g.plane_out();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      T* out = y + (n * g.c_out + co) * plane;
      std::fill_n(out, plane, bias != nullptr ? bias[co] : T(0));
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        const T* in = x + (n * g.c_in + ci) * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const TapRange ry = valid_outputs(g.h_out, g.h, g.stride, g.padding, ky * g.dilation);
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const TapRange rx = valid_outputs(g.w_out, g.w, g.stride, g.padding, kx * g.dilation);
            const T wv = w[((co * g.c_in + ci) * g.k + ky) * g.k + kx];
            for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
              const T* irow = in + (oy * g.stride + ky * g.dilation - g.padding) * g.w;
              T* orow = out + oy * g.w_out;
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                orow[ox] += wv * irow[ox * g.stride + kx * g.dilation - g.padding];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward_direct(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* gx,
                          T* gw, T* gb) {
  const std::size_t plane = g.plane_out();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const T* go = gy + (n * g.c_out + co) * plane;
      if (gb != nullptr) {
        for (std::size_t j = 0; j < plane; ++j) gb[co] += go[j];
      }
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        const T* in = x + (n * g.c_in + ci) * g.h * g.w;
        T* gin = gx != nullptr ? gx + (n * g.c_in + ci) * g.h * g.w : nullptr;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const TapRange ry = valid_outputs(g.h_out, g.h, g.stride, g.padding, ky * g.dilation);
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const TapRange rx = valid_outputs(g.w_out, g.w, g.stride, g.padding, kx * g.dilation);
            const std::size_t wi = ((co * g.c_in + ci) * g.k + ky) * g.k + kx;
            const T wv = w[wi];
            T acc = T(0);
            for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
              const std::size_t row = (oy * g.stride + ky * g.dilation - g.padding) * g.w;
              const T* grow = go + oy * g.w_out;
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                const std::size_t ix = row + ox * g.stride + kx * g.dilation - g.padding;
                acc += grow[ox] * in[ix];
                if (gin != nullptr) gin[ix] += wv * grow[ox];
              }
            }
            if (gw != nullptr) gw[wi] += acc;
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t Conv2dSpec::effective_padding() const {
  if (padding) return *padding;
  if (kernel % 2 == 0) throw ContractError("same padding needs an odd kernel");
  return dilation * (kernel - 1) / 2;
}

template <typename T>
Conv2dLayer<T> Conv2dLayer<T>::zeros(const Conv2dSpec& spec) {
  if (spec.kernel < 1 || spec.dilation < 1 || spec.stride < 1) {
    throw ContractError("Conv2dSpec: kernel, dilation and stride must be >= 1");
  }
  Conv2dLayer<T> layer;
  layer.weight = Tensor<T>(Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
  if (spec.bias) layer.bias = Tensor<T>(Shape{spec.out_channels});
  layer.dilation = spec.dilation;
  layer.stride = spec.stride;
  layer.padding = spec.effective_padding();
  return layer;
}

template <typename T>
void Conv2dLayer<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias) out.push_back({prefix + ".bias", *bias});
}

template <typename T>
DenseLayer<T> DenseLayer<T>::zeros(std::size_t in, std::size_t out) {
  return DenseLayer<T>{Tensor<T>(Shape{out, in}), Tensor<T>(Shape{out})};
}

template <typename T>
void DenseLayer<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ConvAlgorithm conv_algorithm() { return g_conv_algorithm.load(); }
void set_conv_algorithm(ConvAlgorithm algo) { g_conv_algorithm.store(algo); }

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t dilation,
                               std::size_t stride, std::size_t padding) {
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (span > in + 2 * padding) {
    throw DimensionError("conv: kernel extent " + std::to_string(span) + " exceeds padded input " +
                         std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - span) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Conv2dLayer<T>& layer, const Tensor<T>& x) {
  return conv2d(layer, x, conv_algorithm());
}

template <typename T>
Tensor<T> conv2d(const Conv2dLayer<T>& layer, const Tensor<T>& x, ConvAlgorithm algo) {
  const ConvGeometry g = conv_geometry(layer, x);
  std::vector<T> y(g.n * g.c_out * g.plane_out());
  const T* bias = layer.bias ? layer.bias->data().data() : nullptr;
  if (algo == ConvAlgorithm::kDirect) {
    conv_forward_direct(g, x.data().data(), layer.weight.data().data(), bias, y.data());
  } else {
    conv_forward_im2col(g, x.data().data(), layer.weight.data().data(), bias, y.data());
  }
  Tensor<T> result(Shape{g.n, g.c_out, g.h_out, g.w_out}, std::move(y));

  GradTape<T>* tape = layer.bias ? tracking_tape<T>(x, layer.weight, *layer.bias)
                                 : tracking_tape<T>(x, layer.weight);
  if (tape != nullptr) {
    result.set_requires_grad();
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs{x.impl(), layer.weight.impl()};
    std::shared_ptr<TensorImpl<T>> bias_impl;
    if (layer.bias) {
      bias_impl = layer.bias->impl();
      inputs.push_back(bias_impl);
    }
    tape->record(std::move(inputs), result.impl(),
                 [g, algo, xi = x.impl(), wi = layer.weight.impl(), bi = bias_impl,
                  oi = result.impl()] {
                   T* gx = xi->requires_grad ? xi->grad.data() : nullptr;
                   T* gw = wi->requires_grad ? wi->grad.data() : nullptr;
                   T* gb = (bi && bi->requires_grad) ? bi->grad.data() : nullptr;
                   if (algo == ConvAlgorithm::kDirect) {
                     conv_backward_direct(g, xi->data.data(), wi->data.data(), oi->grad.data(), gx,
                                          gw, gb);
                   } else {
                     conv_backward_im2col(g, xi->data.data(), wi->data.data(), oi->grad.data(), gx,
                                          gw, gb);
                   }
                 });
  }
  return result;
}

template <typename T>
Tensor<T> dense(const DenseLayer<T>& layer, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != layer.in_features()) {
    throw DimensionError("dense: input " + shape_str(x.shape()) + " for layer " +
                         shape_str(layer.weight.shape()));
  }
  if (layer.bias.rank() != 1 || layer.bias.dim(0) != layer.out_features()) {
    throw DimensionError("dense: bias shape " + shape_str(layer.bias.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t in = layer.in_features();
  const std::size_t out = layer.out_features();
  std::vector<T> w_t(in * out);
  kernels::transpose(out, in, layer.weight.data().data(), w_t.data());
  std::vector<T> y(n * out);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(layer.bias.data().data(), out, y.data() + i * out);
  kernels::gemm(n, out, in, x.data().data(), in, w_t.data(), out, y.data(), out, true);
  Tensor<T> result(Shape{n, out}, std::move(y));
  if (auto* tape = tracking_tape<T>(x, layer.weight, layer.bias)) {
    result.set_requires_grad();
    tape->record({x.impl(), layer.weight.impl(), layer.bias.impl()}, result.impl(),
                 [n, in, out, xi = x.impl(), wi = layer.weight.impl(), bi = layer.bias.impl(),
                  oi = result.impl()] {
                   const T* g = oi->grad.data();
                   if (xi->requires_grad) {
                     kernels::gemm(n, in, out, g, out, wi->data.data(), in, xi->grad.data(), in, true);
                   }
                   if (wi->requires_grad) {
                     std::vector<T> g_t(out * n);
                     kernels::transpose(n, out, g, g_t.data());
                     kernels::gemm(out, in, n, g_t.data(), n, xi->data.data(), in, wi->grad.data(), in,
                                   true);
                   }
                   if (bi->requires_grad) {
                     for (std::size_t i = 0; i < n; ++i) {
                       kernels::axpy(out, T(1), g + i * out, bi->grad.data());
                     }
                   }
                 });
  }
  return result;
}

namespace {

// Pools `count` values spaced `stride` apart for each of outer*inner lanes.
// Averages sum in ascending value order, so the result is independent of
// the order of the pooled elements.
template <typename T>
Tensor<T> pool_lanes(const Tensor<T>& x, Shape out_shape, std::size_t outer, std::size_t count,
                     std::size_t inner, PoolMode mode) {
  const auto xv = x.data();
  std::vector<T> y(outer * inner);
  std::vector<std::size_t> arg;
  if (mode == PoolMode::kMax) arg.resize(outer * inner);
  std::vector<T> scratch(count);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * count * inner + in;
      const std::size_t lane = o * inner + in;
      if (mode == PoolMode::kMax) {
        std::size_t best = base;
        for (std::size_t c = 1; c < count; ++c) {
          const std::size_t i = base + c * inner;
          if (xv[i] > xv[best]) best = i;
        }
        y[lane] = xv[best];
        arg[lane] = best;
      } else {
        for (std::size_t c = 0; c < count; ++c) scratch[c] = xv[base + c * inner];
        std::sort(scratch.begin(), scratch.end());
        T total = T(0);
        for (T v : scratch) total += v;
        y[lane] = total / static_cast<T>(count);
      }
    }
  }
  Tensor<T> result(std::move(out_shape), std::move(y));
  if (auto* tape = tracking_tape<T>(x)) {
    result.set_requires_grad();
    tape->record({x.impl()}, result.impl(),
                 [mode, outer, count, inner, arg = std::move(arg), xi = x.impl(),
                  oi = result.impl()] {
                   const auto& g = oi->grad;
                   auto& gx = xi->grad;
                   if (mode == PoolMode::kMax) {
                     for (std::size_t lane = 0; lane < arg.size(); ++lane) gx[arg[lane]] += g[lane];
                     return;
                   }
                   const T scale = T(1) / static_cast<T>(count);
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t c = 0; c < count; ++c) {
                       for (std::size_t in = 0; in < inner; ++in) {
                         gx[(o * count + c) * inner + in] += scale * g[o * inner + in];
                       }
                     }
                   }
                 });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> global_pool(const Tensor<T>& x, PoolMode mode) {
  if (x.rank() != 4) throw DimensionError("global_pool: expects NxCxHxW, got " + shape_str(x.shape()));
  if (x.dim(2) == 0 || x.dim(3) == 0) {
    throw DimensionError("global_pool: empty spatial extent " + shape_str(x.shape()));
  }
  return pool_lanes(x, Shape{x.dim(0), x.dim(1)}, x.dim(0) * x.dim(1), x.dim(2) * x.dim(3), 1,
                    mode);
}

template <typename T>
Tensor<T> channel_pool(const Tensor<T>& x, PoolMode mode) {
  if (x.rank() != 4) throw DimensionError("channel_pool: expects NxCxHxW, got " + shape_str(x.shape()));
  if (x.dim(1) == 0) throw DimensionError("channel_pool: no channels");
  return pool_lanes(x, Shape{x.dim(0), 1, x.dim(2), x.dim(3)}, x.dim(0), x.dim(1),
                    x.dim(2) * x.dim(3), mode);
}

namespace {

struct LerpTap {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LerpTap> lerp_taps(std::size_t in, std::size_t factor) {
  std::vector<LerpTap> taps(in * factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t factor) {
  if (factor < 1) throw ContractError("upsample_bilinear: factor must be >= 1");
  if (x.rank() != 4) {
    throw DimensionError("upsample_bilinear: expects NxCxHxW, got " + shape_str(x.shape()));
  }
  if (factor == 1) return reshape(x, x.shape());
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  const std::size_t ho = h * factor;
  const std::size_t wo = w * factor;
  auto ty = lerp_taps(h, factor);
  auto tx = lerp_taps(w, factor);
  std::vector<T> y(planes * ho * wo);
  const auto xv = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * h * w;
    T* dst = y.data() + p * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      const LerpTap& a = ty[oy];
      const T wy1 = static_cast<T>(a.w1);
      const T wy0 = T(1) - wy1;
      const T* r0 = src + a.i0 * w;
      const T* r1 = src + a.i1 * w;
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const LerpTap& b = tx[ox];
        const T wx1 = static_cast<T>(b.w1);
        const T wx0 = T(1) - wx1;
        dst[oy * wo + ox] =
            wy0 * (wx0 * r0[b.i0] + wx1 * r0[b.i1]) + wy1 * (wx0 * r1[b.i0] + wx1 * r1[b.i1]);
      }
    }
  }
  Tensor<T> result(Shape{x.dim(0), x.dim(1), ho, wo}, std::move(y));
  if (auto* tape = tracking_tape<T>(x)) {
    result.set_requires_grad();
    tape->record({x.impl()}, result.impl(),
                 [planes, h, w, ho, wo, ty = std::move(ty), tx = std::move(tx), xi = x.impl(),
                  oi = result.impl()] {
                   for (std::size_t p = 0; p < planes; ++p) {
                     T* gsrc = xi->grad.data() + p * h * w;
                     const T* g = oi->grad.data() + p * ho * wo;
                     for (std::size_t oy = 0; oy < ho; ++oy) {
                       const LerpTap& a = ty[oy];
                       const T wy1 = static_cast<T>(a.w1);
                       const T wy0 = T(1) - wy1;
                       T* r0 = gsrc + a.i0 * w;
                       T* r1 = gsrc + a.i1 * w;
                       for (std::size_t ox = 0; ox < wo; ++ox) {
                         const LerpTap& b = tx[ox];
                         const T wx1 = static_cast<T>(b.w1);
                         const T wx0 = T(1) - wx1;
                         const T gv = g[oy * wo + ox];
                         r0[b.i0] += wy0 * wx0 * gv;
                         r0[b.i1] += wy0 * wx1 * gv;
                         r1[b.i0] += wy1 * wx0 * gv;
                         r1[b.i1] += wy1 * wx1 * gv;
                       }
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> tensors) {
  if (tensors.empty()) throw ContractError("concat: no inputs");
  const Shape& first = tensors[0].shape();
  if (first.size() < 2) throw DimensionError("concat: inputs need a channel axis");
  std::size_t channels = 0;
  for (const auto& t : tensors) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != 1 && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    }
    channels += s[1];
  }
  const std::size_t n = first[0];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < first.size(); ++i) inner *= first[i];
  Shape out_shape(first);
  out_shape[1] = channels;
  std::vector<T> y(n * channels * inner);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    offsets.push_back(offset);
    const std::size_t block = t.dim(1) * inner;
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(t.data().data() + b * block, block, y.data() + (b * channels + offset) * inner);
    }
    offset += t.dim(1);
  }
  Tensor<T> result(out_shape, std::move(y));
  GradTape<T>* tape = active_tape<T>();
  const bool any = std::any_of(tensors.begin(), tensors.end(),
                               [](const Tensor<T>& t) { return t.requires_grad(); });
  if (tape != nullptr && any) {
    result.set_requires_grad();
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    for (const auto& t : tensors) inputs.push_back(t.impl());
    tape->record(inputs, result.impl(),
                 [n, channels, inner, offsets, inputs, oi = result.impl()] {
                   for (std::size_t k = 0; k < inputs.size(); ++k) {
                     auto& in = inputs[k];
                     if (!in->requires_grad) continue;
                     const std::size_t c = in->shape[1];
                     const std::size_t block = c * inner;
                     for (std::size_t b = 0; b < n; ++b) {
                       kernels::axpy(block, T(1),
                                     oi->grad.data() + (b * channels + offsets[k]) * inner,
                                     in->grad.data() + b * block);
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
Conv2dLayer<T> init_params(Rng& rng, const Conv2dSpec& spec) {
  Conv2dLayer<T> layer = Conv2dLayer<T>::zeros(spec);
  const double fan_in = static_cast<double>(spec.in_channels * spec.kernel * spec.kernel);
  const double bound = std::sqrt(6.0 / fan_in);
  for (T& v : layer.weight.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return layer;
}

template <typename T>
DenseLayer<T> init_dense(Rng& rng, std::size_t in, std::size_t out) {
  DenseLayer<T> layer = DenseLayer<T>::zeros(in, out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (T& v : layer.weight.mutable_data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return layer;
}

#define DCD_INSTANTIATE_NN(T)                                                                \
  template struct Conv2dLayer<T>;                                                            \
  template struct DenseLayer<T>;                                                             \
  template Tensor<T> conv2d<T>(const Conv2dLayer<T>&, const Tensor<T>&);                     \
  template Tensor<T> conv2d<T>(const Conv2dLayer<T>&, const Tensor<T>&, ConvAlgorithm);      \
  template Tensor<T> dense<T>(const DenseLayer<T>&, const Tensor<T>&);                       \
  template Tensor<T> global_pool<T>(const Tensor<T>&, PoolMode);                             \
  template Tensor<T> channel_pool<T>(const Tensor<T>&, PoolMode);                            \
  template Tensor<T> upsample_bilinear<T>(const Tensor<T>&, std::size_t);                    \
  template Tensor<T> concat<T>(std::span<const Tensor<T>>);                                  \
  template Conv2dLayer<T> init_params<T>(Rng&, const Conv2dSpec&);                           \
  template DenseLayer<T> init_dense<T>(Rng&, std::size_t, std::size_t);

DCD_INSTANTIATE_NN(float)
DCD_INSTANTIATE_NN(double)

}  // namespace dcd
