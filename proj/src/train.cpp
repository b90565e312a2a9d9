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

#include "dcd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "dcd/ops.hpp"

namespace dcd {

// ---------------------------------------------------------------- optimizer

template <typename T>
OptimState<T> OptimState<T>::fresh(std::span<const Tensor<T>> params, double beta1, double beta2,
                                   double eps) {
  OptimState<T> s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), T(0));
    s.v.emplace_back(p.numel(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, OptimState<T>& state,
               double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ContractError("adam_step: learning rate must be finite and non-negative");
  }
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.m.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.m[i].size() != params[i].numel() ||
        state.v[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " shape " +
                           shape_str(params[i].shape()) + " vs gradient " +
                           shape_str(grads[i].shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T step_size = static_cast<T>(lr);
  const T eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_data();
    const auto g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      theta[j] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, OptimState<T>& state, double lr) {
  std::vector<Tensor<T>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.grad_tensor());
  adam_step<T>(params, std::span<const Tensor<T>>(grads), state, lr);
}

// ----------------------------------------------------------------- schedule

double cosine_lr(const Schedule& sched, std::uint64_t t) {
  if (t > sched.total_steps) {
    throw ContractError("cosine_lr: step " + std::to_string(t) + " beyond schedule length " +
                        std::to_string(sched.total_steps));
  }
  if (t == 0) return sched.lr_max;
  if (t == sched.total_steps) return sched.lr_min;
  const double phase = std::numbers::pi * static_cast<double>(t) /
                       static_cast<double>(sched.total_steps);
  return sched.lr_min + 0.5 * (sched.lr_max - sched.lr_min) * (1.0 + std::cos(phase));
}

// ------------------------------------------------------------ synthetic data

float class_intensity(std::uint8_t label) {
  // Any prefix 1..k stays well separated from its neighbours and from
  // the dark background.
  static constexpr float kLevels[kMaxClassIndex + 1] = {0.08f, 0.92f, 0.40f, 0.66f, 0.24f,
                                                        0.80f, 0.53f, 0.31f, 0.72f, 0.46f,
                                                        0.86f, 0.60f, 0.35f, 0.98f};
  if (label > kMaxClassIndex) throw ContractError("class_intensity: label out of range");
  return kLevels[label];
}

namespace {

struct Ellipse {
  double cx, cy, a, b, theta;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v <= 1.0;
  }
};

SegMask paint(std::size_t size, const std::vector<std::pair<std::uint8_t, Ellipse>>& layers) {
  SegMask mask(size, size);
  for (const auto& [label, e] : layers) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        if (e.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          mask.at(y, x) = label;
        }
      }
    }
  }
  return mask;
}

}  // namespace

SyntheticScene generate_scene(Rng& rng, std::size_t size, std::size_t structures) {
  if (structures > kMaxClassIndex) {
    throw ContractError("generate_scene: at most 13 structures, asked for " +
                        std::to_string(structures));
  }
  if (size < 32) throw ContractError("generate_scene: size must be >= 32");
  SyntheticScene scene;
  scene.seed = rng.next_u64();
  Rng local(scene.seed);
  const double s = static_cast<double>(size);

  // Redraw until every structure keeps a visible share of the frame; the
  // share requirement relaxes to a single pixel after repeated failures.
  for (int attempt = 0;; ++attempt) {
    std::vector<std::uint8_t> order(structures);
    std::iota(order.begin(), order.end(), std::uint8_t{1});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[local.below(i)]);
    }
    // Structures sit at jittered slots on a ring around the frame centre,
    // like chambers around the crux, and overlap their neighbours only
    // partially. Paint order stays random.
    const double spread = std::sqrt(4.0 / static_cast<double>(std::max<std::size_t>(structures, 4)));
    const double phase = local.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<std::pair<std::uint8_t, Ellipse>> layers;
    for (std::uint8_t label : order) {
      const double slot = phase + 2.0 * std::numbers::pi * (label - 1) / static_cast<double>(structures) +
                          local.uniform(-0.25, 0.25);
      const double ring = structures == 1 ? 0.0 : local.uniform(0.18 * s, 0.26 * s);
      Ellipse e{0.5 * s + ring * std::cos(slot), 0.5 * s + ring * std::sin(slot),
                local.uniform(0.12 * s, 0.2 * s) * spread, local.uniform(0.12 * s, 0.2 * s) * spread,
                local.uniform(0.0, std::numbers::pi)};
      layers.emplace_back(label, e);
    }
    SegMask mask = paint(size, layers);
    std::vector<std::size_t> counts(kMaxClassIndex + 1, 0);
    for (std::uint8_t v : mask.labels) ++counts[v];
    const std::size_t need = attempt < 200 ? std::max<std::size_t>(1, size * size / 100) : 1;
    bool ok = true;
    for (std::uint8_t label = 1; label <= structures; ++label) ok = ok && counts[label] >= need;
    if (ok) {
      scene.mask = std::move(mask);
      break;
    }
  }

  std::vector<float> pixels(size * size);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double base = class_intensity(scene.mask.labels[i]);
    const double v = base * (1.0 + kSpeckleSigma * local.normal());
    pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  scene.image = Tensor<float>(Shape{1, size, size}, std::move(pixels));
  return scene;
}

Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t count, std::size_t size,
                               std::size_t structures) {
  Rng rng(seed);
  Dataset data;
  data.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticScene scene = generate_scene(rng, size, structures);
    data.push_back(Sample{std::move(scene.image), std::move(scene.mask)});
  }
  return data;
}

ToySplit make_toy_split(std::uint64_t seed, std::size_t train_count, std::size_t val_count,
                        std::size_t size, std::size_t structures) {
  Rng rng(seed);
  const std::uint64_t train_seed = rng.next_u64();
  const std::uint64_t val_seed = rng.next_u64();
  return ToySplit{make_synthetic_dataset(train_seed, train_count, size, structures),
                  make_synthetic_dataset(val_seed, val_count, size, structures)};
}

Tensor<float> stack_images(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("stack_images: empty batch");
  const Shape& first = data.at(indices[0]).image.shape();
  if (first.size() != 3) {
    throw DimensionError("stack_images: sample image must be C x H x W, got " + shape_str(first));
  }
  const std::size_t per = shape_numel(first);
  std::vector<float> out(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor<float>& img = data.at(indices[i]).image;
    if (img.shape() != first) {
      throw DimensionError("stack_images: mixed sample shapes " + shape_str(first) + " and " +
                           shape_str(img.shape()));
    }
    std::copy(img.data().begin(), img.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return Tensor<float>(Shape{indices.size(), first[0], first[1], first[2]}, std::move(out));
}

// ----------------------------------------------------------------- training

std::string format_log_line(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu, %llu, %.6e, %.6f, %.6f, %.6f, %.6f", e.epoch,
                static_cast<unsigned long long>(e.step), e.lr, e.ce, e.dice, e.total, e.val_miou);
  return buf;
}

ConfusionAccumulator evaluate(const DcdModel<float>& model, const Dataset& data,
                              std::size_t batch_size) {
  ConfusionAccumulator acc(model.config.num_classes);
  if (batch_size == 0) batch_size = 1;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const auto masks = predict(model, stack_images(data, idx));
    for (std::size_t i = 0; i < idx.size(); ++i) acc.add(masks[i], data[idx[i]].mask);
  }
  return acc;
}

TrainResult train(DcdModel<float> model, const TrainSettings& settings, const Dataset& train_set,
                  const Dataset& val_set, const TrainHooks& hooks) {
  if (train_set.empty()) throw ContractError("train: training set is empty");
  if (settings.batch_size == 0) throw ContractError("train: batch_size must be >= 1");
  if (!(settings.lr_min >= 0.0) || !(settings.lr_max >= settings.lr_min)) {
    throw ContractError("train: need 0 <= lr_min <= lr_max");
  }

  std::vector<Tensor<float>> params;
  for (auto& p : model.parameters()) {
    p.tensor.set_requires_grad();
    params.push_back(p.tensor);
  }

  TrainResult result;
  result.state.optim = OptimState<float>::fresh(params, settings.beta1, settings.beta2,
                                                settings.adam_eps);
  const std::size_t steps_per_epoch =
      (train_set.size() + settings.batch_size - 1) / settings.batch_size;
  std::uint64_t total = static_cast<std::uint64_t>(settings.epochs) * steps_per_epoch;
  if (settings.max_steps != 0 && settings.max_steps < total) total = settings.max_steps;
  result.state.schedule = Schedule{settings.lr_min, settings.lr_max, std::max<std::uint64_t>(total, 1)};

  Rng rng(settings.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= settings.epochs && step < total; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double ce_sum = 0.0;
    double dice_sum = 0.0;
    double total_sum = 0.0;
    std::size_t batches = 0;
    double lr = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch && step < total; ++b) {
      const std::size_t first = b * settings.batch_size;
      const std::size_t last = std::min(order.size(), first + settings.batch_size);
      const std::span<const std::size_t> idx(order.data() + first, last - first);
      const Tensor<float> x = stack_images(train_set, idx);
      std::vector<SegMask> masks;
      for (std::size_t i : idx) masks.push_back(train_set[i].mask);

      lr = cosine_lr(result.state.schedule, step);
      GradTape<float> tape;
      LossTerms<float> terms;
      {
        TapeScope<float> scope(tape);
        const Tensor<float> logits = forward(model, x);
        terms = loss_terms(logits, std::span<const SegMask>(masks));
      }
      const double ce = terms.ce.item();
      const double dice = terms.dice.item();
      const double loss = terms.total.item();
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train: non-finite loss at step " << step << " (lr=" << lr << ", ce=" << ce
           << ", dice=" << dice << ", total=" << loss << ")";
        throw NumericError(os.str());
      }
      tape.backward(terms.total);
      adam_step<float>(params, result.state.optim, lr);
      for (auto& p : params) p.zero_grad();
      ++step;
      ce_sum += ce;
      dice_sum += dice;
      total_sum += loss;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.step = step;
    entry.lr = lr;
    entry.ce = ce_sum / static_cast<double>(batches);
    entry.dice = dice_sum / static_cast<double>(batches);
    entry.total = total_sum / static_cast<double>(batches);
    entry.val_miou = std::numeric_limits<double>::quiet_NaN();
    if (!val_set.empty()) {
      if (auto m = evaluate(model, val_set).miou()) entry.val_miou = *m;
    }
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);

    const double score = std::isnan(entry.val_miou) ? -1.0 : entry.val_miou;
    if (result.best_parameters.empty() || score > result.best_val_miou) {
      result.best_val_miou = score;
      result.best_epoch = epoch;
      result.best_parameters.clear();
      for (const auto& p : model.parameters()) result.best_parameters.push_back({p.name, p.tensor.clone()});
      if (hooks.on_best) hooks.on_best(model, entry);
    }
  }
  result.state.step = step;
  result.state.model = std::move(model);
  return result;
}

template struct OptimState<float>;
template struct OptimState<double>;
template void adam_step<float>(std::span<Tensor<float>>, std::span<const Tensor<float>>,
                               OptimState<float>&, double);
template void adam_step<double>(std::span<Tensor<double>>, std::span<const Tensor<double>>,
                                OptimState<double>&, double);
template void adam_step<float>(std::span<Tensor<float>>, OptimState<float>&, double);
template void adam_step<double>(std::span<Tensor<double>>, OptimState<double>&, double);

}  // namespace dcd
