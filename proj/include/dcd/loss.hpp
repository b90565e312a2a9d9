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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcd/seg_mask.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

inline constexpr double kDiceEpsilon = 1e-6;

// Mean over every (sample, pixel) of -log softmax(logits)[true class],
// evaluated with log-sum-exp.
template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, std::span<const SegMask> target);

// Soft Dice over foreground classes, macro-averaged:
//   1 - (2 sum p_c y_c + eps) / (sum p_c + sum y_c + eps)
// A class takes part when it occurs in the target or in the argmax
// prediction. With no participating class the loss is 0.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& logits, std::span<const SegMask> target);

template <typename T>
struct LossTerms {
  Tensor<T> ce;
  Tensor<T> dice;
  Tensor<T> total;  // ce + dice
};

template <typename T>
LossTerms<T> loss_terms(const Tensor<T>& logits, std::span<const SegMask> target);

template <typename T>
Tensor<T> total_loss(const Tensor<T>& logits, std::span<const SegMask> target) {
  return loss_terms(logits, target).total;
}

/// Per-class pixel counts accumulated over a dataset.
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(std::size_t num_classes = kMaxClassIndex + 1u);

  void add(const SegMask& prediction, const SegMask& truth);
  void merge(const ConfusionAccumulator& other);

  std::size_t num_classes() const noexcept { return intersection_.size(); }
  std::uint64_t intersection(std::size_t c) const { return intersection_.at(c); }
  std::uint64_t predicted(std::size_t c) const { return predicted_.at(c); }
  std::uint64_t truth(std::size_t c) const { return truth_.at(c); }

  // |G ∩ P| / |G ∪ P|; nullopt when the class never occurs in either.
  std::optional<double> iou(std::size_t c) const;
  // 2|G ∩ P| / (|G| + |P|); nullopt under the same condition.
  std::optional<double> dice(std::size_t c) const;
  // Unweighted mean IoU over foreground classes with a non-empty union.
  std::optional<double> miou() const;

 private:
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> predicted_;
  std::vector<std::uint64_t> truth_;
};

// Plain-text table: one row per structure abbreviation, then mIoU.
std::string iou_report(const ConfusionAccumulator& acc);

}  // namespace dcd
