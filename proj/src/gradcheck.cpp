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

#include "dcd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcd {
namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  NoGradScope<double> no_grad;
  const Tensor<double> out = f();
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got shape " +
                        shape_str(out.shape()));
  }
  return out.item();
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           std::vector<Tensor<double>> wrt, const GradCheckOptions& options) {
  std::vector<bool> previous_flags;
  for (auto& t : wrt) {
    previous_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    GradTape<double> tape;
    TapeScope<double> scope(tape);
    const Tensor<double> out = f();
    if (out.numel() != 1) {
      throw ContractError("grad_check: function must be scalar-valued, got shape " +
                          shape_str(out.shape()));
    }
    tape.backward(out);
    for (auto& t : wrt) {
      if (t.has_grad()) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
      } else {
        analytic.emplace_back(t.numel(), 0.0);
      }
    }
  }

  GradCheckResult result;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    auto values = wrt[ti].mutable_data();
    const std::size_t n = values.size();
    std::size_t step = 1;
    if (options.max_coords_per_tensor != 0 && n > options.max_coords_per_tensor) {
      step = (n + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    }
    for (std::size_t i = 0; i < n; i += step) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double plus = evaluate(f);
      values[i] = saved - options.eps;
      const double minus = evaluate(f);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[ti][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.worst.empty()) {
        if (rel >= result.max_rel_error) {
          result.max_rel_error = rel;
          std::ostringstream os;
          os.precision(10);
          os << "tensor " << ti << "[" << i << "] analytic=" << a << " numeric=" << numeric;
          result.worst = os.str();
        }
      }
    }
  }

  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    wrt[ti].zero_grad();
    wrt[ti].set_requires_grad(previous_flags[ti]);
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           const Tensor<double>& x, double eps) {
  GradCheckOptions options;
  options.eps = eps;
  return grad_check([&] { return f(x); }, {x}, options);
}

}  // namespace dcd
