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

#include "dcd/loss.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcd/class_table.hpp"
#include "dcd/model.hpp"
#include "dcd/ops.hpp"

namespace dcd {
namespace {

template <typename T>
void check_targets(const Tensor<T>& logits, std::span<const SegMask> target) {
  if (logits.rank() != 4) {
    throw DimensionError("loss: logits must be N x C x H x W, got " + shape_str(logits.shape()));
  }
  if (target.size() != logits.dim(0)) {
    throw DimensionError("loss: " + std::to_string(target.size()) + " masks for batch of " +
                         std::to_string(logits.dim(0)));
  }
  const std::size_t classes = logits.dim(1);
  for (const SegMask& m : target) {
    if (m.height != logits.dim(2) || m.width != logits.dim(3)) {
      throw DimensionError("loss: mask " + std::to_string(m.height) + "x" +
                           std::to_string(m.width) + " vs logits " + shape_str(logits.shape()));
    }
    for (std::uint8_t v : m.labels) {
      if (v >= classes) {
        throw ContractError("loss: target class " + std::to_string(v) + " out of range for " +
                            std::to_string(classes) + " classes");
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, std::span<const SegMask> target) {
  check_targets(logits, target);
  const std::size_t n = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  const std::size_t count = n * plane;
  const auto x = logits.data();
  long double total = 0.0L;
  for (std::size_t b = 0; b < n; ++b) {
    const T* base = x.data() + b * classes * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      T mx = base[i];
      for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, base[c * plane + i]);
      T s = T(0);
      for (std::size_t c = 0; c < classes; ++c) s += std::exp(base[c * plane + i] - mx);
      const std::uint8_t y = target[b].labels[i];
      total += static_cast<long double>(std::log(s) + mx - base[y * plane + i]);
    }
  }
  Tensor<T> result = Tensor<T>::scalar(static_cast<T>(total / static_cast<long double>(count)));
  if (auto* tape = tracking_tape<T>(logits)) {
    result.set_requires_grad();
    std::vector<SegMask> labels(target.begin(), target.end());
    tape->record({logits.impl()}, result.impl(),
                 [n, classes, plane, count, labels = std::move(labels), li = logits.impl(),
                  oi = result.impl()] {
                   const T scale = oi->grad[0] / static_cast<T>(count);
                   const T* xv = li->data.data();
                   T* g = li->grad.data();
                   for (std::size_t b = 0; b < n; ++b) {
                     const T* base = xv + b * classes * plane;
                     T* gb = g + b * classes * plane;
                     for (std::size_t i = 0; i < plane; ++i) {
                       T mx = base[i];
                       for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, base[c * plane + i]);
                       T s = T(0);
                       for (std::size_t c = 0; c < classes; ++c) s += std::exp(base[c * plane + i] - mx);
                       const std::uint8_t y = labels[b].labels[i];
                       for (std::size_t c = 0; c < classes; ++c) {
                         const T p = std::exp(base[c * plane + i] - mx) / s;
                         gb[c * plane + i] += scale * (p - (c == y ? T(1) : T(0)));
                       }
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& logits, std::span<const SegMask> target) {
  check_targets(logits, target);
  const std::size_t n = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);

  Tensor<T> onehot(logits.shape());
  std::vector<T> truth_count(classes, T(0));
  {
    auto oh = onehot.mutable_data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < plane; ++i) {
        const std::uint8_t y = target[b].labels[i];
        oh[(b * classes + y) * plane + i] = T(1);
        truth_count[y] += T(1);
      }
    }
  }
  std::vector<bool> in_prediction(classes, false);
  for (const SegMask& m : argmax_masks(logits)) {
    for (std::uint8_t v : m.labels) in_prediction[v] = true;
  }
  std::vector<T> weight(classes, T(0));
  std::size_t participating = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (truth_count[c] > T(0) || in_prediction[c]) ++participating;
  }
  if (participating == 0) return Tensor<T>::scalar(T(0));
  for (std::size_t c = 1; c < classes; ++c) {
    if (truth_count[c] > T(0) || in_prediction[c]) weight[c] = T(1) / static_cast<T>(participating);
  }

  const T eps = static_cast<T>(kDiceEpsilon);
  const Tensor<T> prob = softmax(logits, 1);
  const Tensor<T> overlap = reduce(Reduction::kSum, mul(prob, onehot), {0, 2, 3});
  const Tensor<T> mass = reduce(Reduction::kSum, prob, {0, 2, 3});
  const Tensor<T> numer = affine(overlap, T(2), eps);
  const Tensor<T> denom = add(mass, Tensor<T>(Shape{classes}, [&] {
                                std::vector<T> v(truth_count);
                                for (T& t : v) t += eps;
                                return v;
                              }()));
  const Tensor<T> per_class = affine(div(numer, denom), T(-1), T(1));
  return sum_all(mul(per_class, Tensor<T>(Shape{classes}, std::move(weight))));
}

template <typename T>
LossTerms<T> loss_terms(const Tensor<T>& logits, std::span<const SegMask> target) {
  LossTerms<T> terms;
  terms.ce = ce_loss(logits, target);
  terms.dice = dice_loss(logits, target);
  terms.total = add(terms.ce, terms.dice);
  return terms;
}

ConfusionAccumulator::ConfusionAccumulator(std::size_t num_classes)
    : intersection_(num_classes, 0), predicted_(num_classes, 0), truth_(num_classes, 0) {
  if (num_classes < 2) throw ContractError("ConfusionAccumulator: need at least 2 classes");
}

void ConfusionAccumulator::add(const SegMask& prediction, const SegMask& truth) {
  if (prediction.height != truth.height || prediction.width != truth.width ||
      prediction.labels.size() != truth.labels.size()) {
    throw DimensionError("ConfusionAccumulator: prediction and truth extents differ");
  }
  const std::size_t classes = num_classes();
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const std::uint8_t p = prediction.labels[i];
    const std::uint8_t g = truth.labels[i];
    if (p >= classes || g >= classes) {
      throw ContractError("ConfusionAccumulator: label " + std::to_string(std::max(p, g)) +
                          " out of range");
    }
    ++predicted_[p];
    ++truth_[g];
    if (p == g) ++intersection_[p];
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.num_classes() != num_classes()) {
    throw DimensionError("ConfusionAccumulator: merging different class counts");
  }
  for (std::size_t c = 0; c < num_classes(); ++c) {
    intersection_[c] += other.intersection_[c];
    predicted_[c] += other.predicted_[c];
    truth_[c] += other.truth_[c];
  }
}

std::optional<double> ConfusionAccumulator::iou(std::size_t c) const {
  const std::uint64_t uni = predicted_.at(c) + truth_.at(c) - intersection_.at(c);
  if (uni == 0) return std::nullopt;
  return static_cast<double>(intersection_[c]) / static_cast<double>(uni);
}

std::optional<double> ConfusionAccumulator::dice(std::size_t c) const {
  const std::uint64_t total = predicted_.at(c) + truth_.at(c);
  if (total == 0) return std::nullopt;
  return 2.0 * static_cast<double>(intersection_[c]) / static_cast<double>(total);
}

std::optional<double> ConfusionAccumulator::miou() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 1; c < num_classes(); ++c) {
    if (auto v = iou(c)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::string iou_report(const ConfusionAccumulator& acc) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %-24s %8s\n", "Class", "Structure", "IoU");
  os << line;
  for (const ClassInfo& info : kClassTable) {
    if (info.index >= acc.num_classes()) break;
    const auto v = acc.iou(info.index);
    if (v) {
      std::snprintf(line, sizeof line, "%-6.*s %-24.*s %8.3f\n",
                    static_cast<int>(info.abbreviation.size()), info.abbreviation.data(),
                    static_cast<int>(info.name.size()), info.name.data(), *v);
    } else {
      std::snprintf(line, sizeof line, "%-6.*s %-24.*s %8s\n",
                    static_cast<int>(info.abbreviation.size()), info.abbreviation.data(),
                    static_cast<int>(info.name.size()), info.name.data(), "n/a");
    }
    os << line;
  }
  const auto m = acc.miou();
  if (m) {
    std::snprintf(line, sizeof line, "%-6s %-24s %8.3f\n", "mIoU", "", *m);
  } else {
    std::snprintf(line, sizeof line, "%-6s %-24s %8s\n", "mIoU", "", "n/a");
  }
  os << line;
  return os.str();
}

#define DCD_INSTANTIATE_LOSS(T)                                                          \
  template Tensor<T> ce_loss<T>(const Tensor<T>&, std::span<const SegMask>);             \
  template Tensor<T> dice_loss<T>(const Tensor<T>&, std::span<const SegMask>);           \
  template LossTerms<T> loss_terms<T>(const Tensor<T>&, std::span<const SegMask>);

DCD_INSTANTIATE_LOSS(float)
DCD_INSTANTIATE_LOSS(double)

}  // namespace dcd
