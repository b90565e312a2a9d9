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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcd/loss.hpp"
#include "dcd/model.hpp"
#include "dcd/rng.hpp"

namespace dcd {

// ---------------------------------------------------------------- optimizer

template <typename T>
struct OptimState {
  std::vector<std::vector<T>> m;  // first moments, one buffer per parameter
  std::vector<std::vector<T>> v;  // second moments
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Zeroed buffers mirroring `params`.
  static OptimState fresh(std::span<const Tensor<T>> params, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8);
};

// One bias-corrected Adam update:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads,
               OptimState<T>& state, double lr);

// Same, taking each parameter's own gradient buffer (absent = zero).
template <typename T>
void adam_step(std::span<Tensor<T>> params, OptimState<T>& state, double lr);

// ----------------------------------------------------------------- schedule

struct Schedule {
  double lr_min = 5e-6;
  double lr_max = 5e-4;
  std::uint64_t total_steps = 1;
};

// lr_min + (lr_max - lr_min) (1 + cos(pi t / T)) / 2, with both endpoints exact.
double cosine_lr(const Schedule& sched, std::uint64_t t);

// ------------------------------------------------------------ synthetic data

struct SyntheticScene {
  Tensor<float> image;  // [1 x H x W], values in [0, 1]
  SegMask mask;
  std::uint64_t seed = 0;
};

inline constexpr double kSpeckleSigma = 0.2;

// Base grey level of each class before speckle.
float class_intensity(std::uint8_t label);

// k ellipses labelled 1..k composited back to front over background 0,
// then multiplicative speckle. Throws ContractError for k > 13 or size < 32.
SyntheticScene generate_scene(Rng& rng, std::size_t size, std::size_t structures);

struct Sample {
  Tensor<float> image;  // [C x H x W]
  SegMask mask;
};

using Dataset = std::vector<Sample>;

Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t count, std::size_t size,
                               std::size_t structures);

struct ToySplit {
  Dataset train;
  Dataset val;
};

// Train and validation sets drawn from two streams derived from `seed`.
ToySplit make_toy_split(std::uint64_t seed, std::size_t train_count, std::size_t val_count,
                        std::size_t size, std::size_t structures);

// Stacks the selected samples into an N x C x H x W batch.
Tensor<float> stack_images(const Dataset& data, std::span<const std::size_t> indices);

// ----------------------------------------------------------------- training

struct TrainSettings {
  std::size_t batch_size = 4;
  std::size_t epochs = 6;
  std::size_t max_steps = 0;  // 0 = epochs * steps_per_epoch
  double lr_min = 5e-6;
  double lr_max = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;

  bool operator==(const TrainSettings&) const = default;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0;
  double ce = 0;
  double dice = 0;
  double total = 0;
  double val_miou = 0;  // NaN when no validation class occurs
};

// "epoch, step, lr, ce, dice, total, val_miou"
std::string format_log_line(const EpochLog& e);
inline constexpr const char* kLogHeader = "# epoch, step, lr, ce, dice, total, val_miou";

struct TrainState {
  DcdModel<float> model;
  OptimState<float> optim;
  Schedule schedule;
  std::uint64_t step = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> log;
  double best_val_miou = -1.0;
  std::size_t best_epoch = 0;
  ParameterList<float> best_parameters;  // deep copies taken at the best epoch
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  // Called whenever validation mIoU improves, with the current model.
  std::function<void(const DcdModel<float>&, const EpochLog&)> on_best;
};

TrainResult train(DcdModel<float> model, const TrainSettings& settings, const Dataset& train_set,
                  const Dataset& val_set, const TrainHooks& hooks = {});

// Runs the model over `data` in batches and accumulates confusion counts.
ConfusionAccumulator evaluate(const DcdModel<float>& model, const Dataset& data,
                              std::size_t batch_size = 8);

}  // namespace dcd
