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
#include <string>
#include <vector>

#include "dcd/tensor.hpp"

namespace dcd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst;  // "<tensor>[<index>] analytic=... numeric=..."
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Per-tensor cap on perturbed coordinates; 0 checks every coordinate.
  // Capped tensors are sampled with a fixed stride so runs are repeatable.
  std::size_t max_coords_per_tensor = 0;
  // Lower bound on the denominator of the relative error, so coordinates
  // whose true derivative sits at the level of double rounding noise in
  // the loss are compared absolutely.
  double denominator_floor = 1e-8;
};

// Compares tape gradients of the scalar function `f` against central
// differences, over every tensor in `wrt` (each must be a leaf).
//
//   rel = |analytic - numeric| / max(|analytic|, |numeric|, floor)
//
// Throws ContractError if f is not scalar-valued.
GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<Tensor<double>> wrt, const GradCheckOptions& options = {});

// Single-input form: f(x).
GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           const Tensor<double>& x, double eps = 1e-5);

}  // namespace dcd

namespace dcd {

struct GradSuiteCase {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

inline constexpr double kGradSuiteTolerance = 1e-4;
inline constexpr double kGradSuiteFloor = 1e-6;

// Finite-difference checks in double precision over every differentiable
// building block, the attention and pyramid modules, both losses, and the
// full segmentation network on a 16 x 16 input. Non-scalar outputs are
// contracted against a fixed random tensor. Uses kGradSuiteFloor as the
// denominator floor.
std::vector<GradSuiteCase> run_gradcheck_suite(std::uint64_t seed = 42,
                                               double tolerance = kGradSuiteTolerance);

}  // namespace dcd
