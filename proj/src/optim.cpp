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

#include "dsgas/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dsgas {

namespace {

void ensure_state(std::vector<std::vector<double>>& state, const std::vector<Tensor>& params) {
  if (state.empty()) {
    state.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) state[i].assign(params[i].size(), 0.0);
    return;
  }
  if (state.size() != params.size()) throw std::invalid_argument("optimizer: parameter list changed size");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state[i].size() != params[i].size()) throw std::invalid_argument("optimizer: parameter shape changed");
}

}  // namespace

void Adam::step(std::vector<Tensor>& params) {
  ensure_state(m_, params);
  ensure_state(v_, params);
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    auto grad = params[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g;
      v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= opts_.lr * m_hat / (std::sqrt(v_hat) + opts_.eps);
    }
  }
}

void Adam::restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

void Sgd::step(std::vector<Tensor>& params) {
  const bool use_momentum = opts_.momentum != 0.0;
  if (use_momentum) ensure_state(velocity_, params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    auto grad = params[i].grad();
    if (grad.empty() && !use_momentum) continue;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      if (use_momentum) {
        double& vel = velocity_[i][j];
        vel = opts_.momentum * vel + g;
        values[j] -= opts_.lr * vel;
      } else {
        values[j] -= opts_.lr * g;
      }
    }
  }
}

}  // namespace dsgas
