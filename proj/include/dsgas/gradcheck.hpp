/*
 * Copyright 2026 The dsgas Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dsgas/tensor.hpp"

namespace dsgas {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t retried = 0;  // coordinates re-measured with a smaller step
};

/// Compares reverse-mode gradients of `loss_fn` against central differences.
///
/// `loss_fn` must rebuild the scalar loss from the current parameter values on
/// every call. Each coordinate contributes
///   |analytic - (f(p + eps) - f(p - eps)) / 2 eps| / (|analytic| + floor)
/// and the maximum over all coordinates is reported. Central differences in
/// double precision carry roughly 1e-10 absolute roundoff at eps = 1e-5, so
/// the floor must sit well above that for gradients that are exactly zero.
/// Gradients on `params` are cleared before and after the check.
///
/// ReLU, max and clamp are piecewise smooth; a kink closer than eps to the
/// evaluation point corrupts that coordinate's central difference. With a
/// finite `kink_retry_above`, a coordinate above that error is measured once
/// more at eps / 10 and the second measurement counts. A wrong analytic
/// gradient fails both.
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  double eps = 1e-5, const std::vector<std::string>& names = {},
                                  double floor = 1e-5, double kink_retry_above = INFINITY);

}  // namespace dsgas
