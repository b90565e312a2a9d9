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

#include "dcd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dcd/kernels/kernels.hpp"

namespace dcd {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  p.out = broadcast_shape(a, b);
  p.stride_a = contiguous_strides(a);
  p.stride_b = contiguous_strides(b);
  for (std::size_t i = 0; i < p.out.size(); ++i) {
    if (a[i] == 1 && p.out[i] != 1) p.stride_a[i] = 0;
    if (b[i] == 1 && p.out[i] != 1) p.stride_b[i] = 0;
  }
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element in order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const std::size_t rank = p.out.size();
  const std::size_t total = shape_numel(p.out);
  if (total == 0) return;
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t inner = p.out[rank - 1];
  const std::size_t sa = p.stride_a[rank - 1];
  const std::size_t sb = p.stride_b[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0;
  std::size_t ob = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(o + j, oa + j * sa, ob + j * sb);
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      ++idx[ax];
      oa += p.stride_a[ax];
      ob += p.stride_b[ax];
      if (idx[ax] < p.out[ax]) break;
      oa -= idx[ax] * p.stride_a[ax];
      ob -= idx[ax] * p.stride_b[ax];
      idx[ax] = 0;
    }
  }
}

template <typename T>
T clamp_open_unit(T y) {
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  return std::clamp(y, lo, hi);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> binary(Elementwise op, const Tensor<T>& a, const Tensor<T>& b) {
  const BroadcastPlan plan = plan_broadcast(a.shape(), b.shape());
  const auto av = a.data();
  const auto bv = b.data();
  if (op == Elementwise::kDiv) {
    for (T x : bv) {
      if (x == T(0)) throw NumericError("div: exact zero in divisor");
    }
  }
  std::vector<T> out(shape_numel(plan.out));
  switch (op) {
    case Elementwise::kAdd:
      for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = av[i] + bv[j]; });
      break;
    case Elementwise::kSub:
      for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = av[i] - bv[j]; });
      break;
    case Elementwise::kMul:
      for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = av[i] * bv[j]; });
      break;
    case Elementwise::kDiv:
      for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = av[i] / bv[j]; });
      break;
    default:
      throw ContractError("elementwise: unary op given two operands");
  }
  Tensor<T> result(plan.out, std::move(out));
  if (auto* tape = tracking_tape<T>(a, b)) {
    result.set_requires_grad();
    tape->record({a.impl(), b.impl()}, result.impl(),
                 [op, plan, ai = a.impl(), bi = b.impl(), oi = result.impl()] {
                   const auto& g = oi->grad;
                   const auto& x = ai->data;
                   const auto& y = bi->data;
                   const bool ga = ai->requires_grad;
                   const bool gb = bi->requires_grad;
                   auto& dx = ai->grad;
                   auto& dy = bi->grad;
                   switch (op) {
                     case Elementwise::kAdd:
                       for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
                         if (ga) dx[i] += g[o];
                         if (gb) dy[j] += g[o];
                       });
                       break;
                     case Elementwise::kSub:
                       for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
                         if (ga) dx[i] += g[o];
                         if (gb) dy[j] -= g[o];
                       });
                       break;
                     case Elementwise::kMul:
                       for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
                         if (ga) dx[i] += g[o] * y[j];
                         if (gb) dy[j] += g[o] * x[i];
                       });
                       break;
                     case Elementwise::kDiv:
                       for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
                         if (ga) dx[i] += g[o] / y[j];
                         if (gb) dy[j] -= g[o] * x[i] / (y[j] * y[j]);
                       });
                       break;
                     default:
                       break;
                   }
                 });
  }
  return result;
}

template <typename T>
Tensor<T> unary(Elementwise op, const Tensor<T>& x) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  if (op == Elementwise::kRelu) {
    kernels::relu(xv.size(), xv.data(), out.data());
  } else if (op == Elementwise::kSigmoid) {
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = clamp_open_unit(stable_sigmoid(xv[i]));
  } else {
    throw ContractError("elementwise: binary op needs a second operand");
  }
  Tensor<T> result(x.shape(), std::move(out));
  if (auto* tape = tracking_tape<T>(x)) {
    result.set_requires_grad();
    tape->record({x.impl()}, result.impl(), [op, xi = x.impl(), oi = result.impl()] {
      const std::size_t n = xi->data.size();
      if (op == Elementwise::kRelu) {
        kernels::relu_backward(n, xi->data.data(), oi->grad.data(), xi->grad.data());
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const T y = oi->data[i];
          xi->grad[i] += oi->grad[i] * y * (T(1) - y);
        }
      }
    });
  }
  return result;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw DimensionError("broadcast: rank mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw DimensionError("broadcast: incompatible shapes " + shape_str(a) + " and " +
                           shape_str(b));
    }
  }
  return out;
}

template <typename T>
Tensor<T> elementwise(Elementwise op, const Tensor<T>& a, const Tensor<T>* b) {
  if (op == Elementwise::kRelu || op == Elementwise::kSigmoid) return unary(op, a);
  if (b == nullptr) throw ContractError("elementwise: binary op needs a second operand");
  return binary(op, a, *b);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Elementwise::kAdd, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Elementwise::kSub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Elementwise::kMul, a, b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Elementwise::kDiv, a, b);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(Elementwise::kRelu, x);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(Elementwise::kSigmoid, x);
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = scale * xv[i] + shift;
  Tensor<T> result(x.shape(), std::move(out));
  if (auto* tape = tracking_tape<T>(x)) {
    result.set_requires_grad();
    tape->record({x.impl()}, result.impl(), [scale, xi = x.impl(), oi = result.impl()] {
      kernels::axpy(oi->grad.size(), scale, oi->grad.data(), xi->grad.data());
    });
  }
  return result;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  kernels::gemm(m, n, k, a.data().data(), k, b.data().data(), n, out.data(), n, false);
  Tensor<T> result(Shape{m, n}, std::move(out));
  if (auto* tape = tracking_tape<T>(a, b)) {
    result.set_requires_grad();
    tape->record({a.impl(), b.impl()}, result.impl(),
                 [m, n, k, ai = a.impl(), bi = b.impl(), oi = result.impl()] {
                   if (ai->requires_grad) {
                     // dA = dC * B^T
                     std::vector<T> bt(n * k);
                     kernels::transpose(k, n, bi->data.data(), bt.data());
                     kernels::gemm(m, k, n, oi->grad.data(), n, bt.data(), k, ai->grad.data(), k,
                                   true);
                   }
                   if (bi->requires_grad) {
                     // dB = A^T * dC
                     std::vector<T> at(k * m);
                     kernels::transpose(m, k, ai->data.data(), at.data());
                     kernels::gemm(k, n, m, at.data(), m, oi->grad.data(), n, bi->grad.data(), n,
                                   true);
                   }
                 });
  }
  return result;
}

template <typename T>
Tensor<T> reduce(Reduction op, const Tensor<T>& t, const std::vector<std::size_t>& axes,
                 bool keep_dims) {
  const Shape& in_shape = t.shape();
  std::vector<bool> reduced(in_shape.size(), false);
  for (std::size_t ax : axes) {
    if (ax >= in_shape.size()) {
      throw DimensionError("reduce: axis " + std::to_string(ax) + " invalid for shape " +
                           shape_str(in_shape));
    }
    if (reduced[ax]) throw DimensionError("reduce: duplicate axis " + std::to_string(ax));
    reduced[ax] = true;
  }
  Shape kept_shape(in_shape);
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    if (reduced[i]) {
      kept_shape[i] = 1;
      count *= in_shape[i];
      if (keep_dims) out_shape.push_back(1);
    } else {
      out_shape.push_back(in_shape[i]);
    }
  }
  if (count == 0) throw DimensionError("reduce: empty reduction over " + shape_str(in_shape));

  // out_index[i] maps input element i to its output slot.
  const auto in_strides = contiguous_strides(in_shape);
  const auto kept_strides = contiguous_strides(kept_shape);
  const std::size_t n_in = t.numel();
  std::vector<std::size_t> out_index(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    std::size_t rem = i;
    std::size_t o = 0;
    for (std::size_t ax = 0; ax < in_shape.size(); ++ax) {
      const std::size_t coord = rem / in_strides[ax];
      rem %= in_strides[ax];
      if (!reduced[ax]) o += coord * kept_strides[ax];
    }
    out_index[i] = o;
  }

  const auto x = t.data();
  const std::size_t n_out = shape_numel(kept_shape);
  std::vector<T> out(n_out, T(0));
  std::vector<std::size_t> arg;
  if (op == Reduction::kMax) {
    arg.assign(n_out, std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < n_in; ++i) {
      const std::size_t o = out_index[i];
      if (arg[o] == std::numeric_limits<std::size_t>::max() || x[i] > out[o]) {
        out[o] = x[i];
        arg[o] = i;
      }
    }
  } else {
    // Extended accumulators keep long reductions free of order-dependent
    // rounding drift.
    std::vector<long double> acc(n_out, 0.0L);
    for (std::size_t i = 0; i < n_in; ++i) acc[out_index[i]] += x[i];
    const long double scale = op == Reduction::kMean ? 1.0L / static_cast<long double>(count) : 1.0L;
    for (std::size_t o = 0; o < n_out; ++o) out[o] = static_cast<T>(acc[o] * scale);
  }
  Tensor<T> result(out_shape, std::move(out));
  if (auto* tape = tracking_tape<T>(t)) {
    result.set_requires_grad();
    tape->record({t.impl()}, result.impl(),
                 [op, count, out_index = std::move(out_index), arg = std::move(arg),
                  xi = t.impl(), oi = result.impl()] {
                   auto& gx = xi->grad;
                   const auto& g = oi->grad;
                   if (op == Reduction::kMax) {
                     for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += g[o];
                     return;
                   }
                   const T s = op == Reduction::kMean ? T(1) / static_cast<T>(count) : T(1);
                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[out_index[i]];
                 });
  }
  return result;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& t) {
  std::vector<std::size_t> axes(t.rank());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  return reduce(Reduction::kSum, t, axes, false);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto x = t.data();
  std::vector<T> y(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = x[base];
      for (std::size_t c = 1; c < len; ++c) mx = std::max(mx, x[base + c * inner]);
      T total = T(0);
      for (std::size_t c = 0; c < len; ++c) {
        const T e = std::exp(x[base + c * inner] - mx);
        y[base + c * inner] = e;
        total += e;
      }
      for (std::size_t c = 0; c < len; ++c) y[base + c * inner] /= total;
    }
  }
  Tensor<T> result(s, std::move(y));
  if (auto* tape = tracking_tape<T>(t)) {
    result.set_requires_grad();
    tape->record({t.impl()}, result.impl(), [outer, inner, len, xi = t.impl(), oi = result.impl()] {
      const auto& yv = oi->data;
      const auto& g = oi->grad;
      auto& gx = xi->grad;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          T dot = T(0);
          for (std::size_t c = 0; c < len; ++c) dot += g[base + c * inner] * yv[base + c * inner];
          for (std::size_t c = 0; c < len; ++c) {
            const std::size_t i = base + c * inner;
            gx[i] += yv[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw DimensionError("reshape: " + shape_str(t.shape()) + " to " + shape_str(shape));
  }
  Tensor<T> result(std::move(shape), std::vector<T>(t.data().begin(), t.data().end()));
  if (auto* tape = tracking_tape<T>(t)) {
    result.set_requires_grad();
    tape->record({t.impl()}, result.impl(), [xi = t.impl(), oi = result.impl()] {
      kernels::axpy(oi->grad.size(), T(1), oi->grad.data(), xi->grad.data());
    });
  }
  return result;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& t, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = t.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw DimensionError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const std::size_t width = end - begin;
  Shape out_shape(s);
  out_shape[axis] = width;
  std::vector<T> out(outer * width * inner);
  const auto x = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((o * len + begin) * inner), width * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * width * inner));
  }
  Tensor<T> result(out_shape, std::move(out));
  if (auto* tape = tracking_tape<T>(t)) {
    result.set_requires_grad();
    tape->record({t.impl()}, result.impl(),
                 [outer, inner, len, begin, width, xi = t.impl(), oi = result.impl()] {
                   for (std::size_t o = 0; o < outer; ++o) {
                     kernels::axpy(width * inner, T(1), oi->grad.data() + o * width * inner,
                                   xi->grad.data() + (o * len + begin) * inner);
                   }
                 });
  }
  return result;
}

#define DCD_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> elementwise<T>(Elementwise, const Tensor<T>&, const Tensor<T>*);        \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                           \
  template Tensor<T> affine<T>(const Tensor<T>&, T, T);                                      \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> reduce<T>(Reduction, const Tensor<T>&, const std::vector<std::size_t>&, \
                               bool);                                                        \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                           \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);                              \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                    \
  template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t);

DCD_INSTANTIATE_OPS(float)
DCD_INSTANTIATE_OPS(double)

}  // namespace dcd
