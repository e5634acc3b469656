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

#include <cstdint>
#include <vector>

#include "dsgas/tensor.hpp"

namespace dsgas {

/// Adam with bias correction. State vectors are aligned with the parameter
/// list handed to step(); the list order must stay fixed for a run.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options opts) : opts_(opts) {}

  /// One update of every parameter from its accumulated gradient. A parameter
  /// without a gradient buffer is treated as having a zero gradient.
  void step(std::vector<Tensor>& params);

  const Options& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }
  std::uint64_t steps() const { return t_; }

  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  Options opts_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Plain SGD, optional heavy-ball momentum: v <- mu v + g; p <- p - lr v.
class Sgd {
 public:
  struct Options {
    double lr = 1e-2;
    double momentum = 0.0;
  };

  Sgd() = default;
  explicit Sgd(Options opts) : opts_(opts) {}

  void step(std::vector<Tensor>& params);

  const Options& options() const { return opts_; }
  std::vector<std::vector<double>>& velocity() { return velocity_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }
  void restore(std::vector<std::vector<double>> velocity) { velocity_ = std::move(velocity); }

 private:
  Options opts_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace dsgas
