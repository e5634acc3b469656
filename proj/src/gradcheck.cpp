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

#include "dsgas/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dsgas {

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params, double eps,
                                  const std::vector<std::string>& names, double floor, double kink_retry_above) {
  for (auto& p : params) p.zero_grad();
  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic[i].assign(params[i].size(), 0.0);
    if (params[i].has_grad()) analytic[i].assign(params[i].grad().begin(), params[i].grad().end());
    params[i].zero_grad();
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      auto central = [&](double h) {
        values[j] = saved + h;
        const double up = loss_fn().item();
        values[j] = saved - h;
        const double down = loss_fn().item();
        values[j] = saved;
        return (up - down) / (2.0 * h);
      };
      const double a = analytic[i][j];
      double numeric = central(eps);
      if (std::abs(a - numeric) / (std::abs(a) + floor) > kink_retry_above) {
        numeric = central(eps / 10.0);
        ++result.retried;
      }
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / (std::abs(a) + floor);
      ++result.coordinates;
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error || std::isnan(rel)) {
        result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_param = i < names.size() ? names[i] : "param" + std::to_string(i);
        result.worst_index = j;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dsgas
