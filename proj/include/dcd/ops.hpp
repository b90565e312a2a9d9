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
#include <vector>

#include "dcd/tensor.hpp"

// Differentiable tensor operations. Each op records a backward rule on the
// active tape when any input requires a gradient.
namespace dcd {

enum class Elementwise { kAdd, kSub, kMul, kDiv, kRelu, kSigmoid };
enum class Reduction { kSum, kMean, kMax };

// Binary ops broadcast along singleton axes; operands must have equal rank.
// Unary ops ignore `b`.
template <typename T>
Tensor<T> elementwise(Elementwise op, const Tensor<T>& a, const Tensor<T>* b = nullptr);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// scale * x + shift
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Reduces over `axes` (any order, duplicates rejected). With keep_dims the
// reduced axes stay as extent 1. Max routes its gradient to the first
// maximal element in linear order.
template <typename T>
Tensor<T> reduce(Reduction op, const Tensor<T>& t, const std::vector<std::size_t>& axes,
                 bool keep_dims = false);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& t);

// Max-subtracted softmax along one axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& t, std::size_t axis);

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, Shape shape);

// Extent-preserving copy of [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& t, std::size_t axis, std::size_t begin, std::size_t end);

// Shape that `a` and `b` broadcast to; throws DimensionError otherwise.
Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace dcd
