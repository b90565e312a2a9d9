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
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcd/errors.hpp"

namespace dcd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape);

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is produced
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty() && !data.empty()) grad.assign(data.size(), T(0));
  }
};

/// Dense row-major array with an optional gradient buffer.
///
/// Copies share storage; use clone() for an independent copy. Values are
/// treated as immutable once an op has consumed the tensor, except for
/// parameter updates made by the optimizer.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Impl = TensorImpl<T>;

  Tensor() : impl_(std::make_shared<Impl>()) { impl_->data.assign(1, T(0)); }

  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Impl>()) {
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("Tensor: shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return impl_->shape; }
  std::size_t rank() const noexcept { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const noexcept { return impl_->data.size(); }

  std::span<const T> data() const noexcept { return impl_->data; }
  std::span<T> mutable_data() noexcept { return impl_->data; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  // 4-D accessor for NCHW tensors.
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
  }

  bool requires_grad() const noexcept { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    impl_->requires_grad = on;
    return *this;
  }

  bool has_grad() const noexcept { return !impl_->grad.empty(); }
  std::span<const T> grad() const noexcept { return impl_->grad; }
  std::span<T> mutable_grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  Tensor grad_tensor() const {
    if (!has_grad()) return Tensor(shape());
    return Tensor(shape(), impl_->grad);
  }

  // Deep copy of the values; the copy is an untracked leaf.
  Tensor clone() const { return Tensor(shape(), impl_->data); }

  // Same values viewed under a new shape with equal element count (copying).
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), impl_->data); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(impl_->data.begin(), impl_->data.end());
    return Tensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<Impl>& impl() const noexcept { return impl_; }
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of executed differentiable ops.
///
/// A tape is filled by one forward pass and consumed by exactly one call to
/// backward(). It must stay on the thread that created it.
template <typename T>
class GradTape {
 public:
  using Impl = TensorImpl<T>;
  using BackwardFn = std::function<void()>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(std::vector<std::shared_ptr<Impl>> inputs, std::shared_ptr<Impl> output,
              BackwardFn fn) {
    if (consumed_) throw ContractError("GradTape: recording onto a consumed tape");
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(fn)});
  }

  // Seeds d(root)/d(root) = 1 and runs every recorded rule in reverse order.
  void backward(const Tensor<T>& root);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Reverse execution order of the last backward(), as node indices.
  const std::vector<std::size_t>& visit_order() const noexcept { return visit_order_; }

 private:
  struct Node {
    std::vector<std::shared_ptr<Impl>> inputs;
    std::shared_ptr<Impl> output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> visit_order_;
  bool consumed_ = false;
};

template <typename T>
GradTape<T>*& active_tape_slot() {
  thread_local GradTape<T>* slot = nullptr;
  return slot;
}

template <typename T>
GradTape<T>* active_tape() {
  return active_tape_slot<T>();
}

/// Makes a tape current for this thread for the scope's lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(GradTape<T>& tape) : previous_(active_tape_slot<T>()) {
    active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { active_tape_slot<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape<T>* previous_;
};

/// Suspends recording (evaluation passes, finite differences).
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(active_tape_slot<T>()) { active_tape_slot<T>() = nullptr; }
  ~NoGradScope() { active_tape_slot<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  GradTape<T>* previous_;
};

// Returns the active tape when any input is tracked, else nullptr.
template <typename T, typename... Ts>
GradTape<T>* tracking_tape(const Ts&... inputs) {
  GradTape<T>* tape = active_tape<T>();
  if (tape == nullptr) return nullptr;
  const bool any = (inputs.requires_grad() || ...);
  return any ? tape : nullptr;
}

template <typename T>
void GradTape<T>::backward(const Tensor<T>& root) {
  if (consumed_) throw ContractError("GradTape: backward() already ran on this tape");
  if (root.numel() != 1) {
    throw ContractError("GradTape: backward root must be scalar, got shape " +
                        shape_str(root.shape()));
  }
  consumed_ = true;
  root.impl()->ensure_grad();
  root.impl()->grad[0] += T(1);
  visit_order_.clear();
  visit_order_.reserve(nodes_.size());
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    visit_order_.push_back(i);
    if (node.output->grad.empty()) continue;
    for (auto& in : node.inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    node.fn();
  }
  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
  }
}

}  // namespace dcd
