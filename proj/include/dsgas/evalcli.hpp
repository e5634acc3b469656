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
#include <iosfwd>
#include <string>
#include <vector>

#include "dsgas/supernet.hpp"
#include "dsgas/tensor.hpp"

namespace dsgas {

enum class ProbeKind {
  kGraphFolds,  // stratified k-fold, repeated
  kNodeSplits,  // stratified random train/val/test splits
};

/// Names: logreg_10fold_graph | logreg_splits_node.
const char* to_string(ProbeKind kind);
ProbeKind probe_kind_from_string(const std::string& s);

struct ProbeProtocol {
  ProbeKind kind = ProbeKind::kGraphFolds;
  std::size_t folds = 10;
  std::size_t repetitions = 5;  // graph folds
  std::size_t splits = 20;      // node splits
  double train_fraction = 0.1;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  std::size_t iterations = 500;

  static ProbeProtocol defaults_for(ProbeKind kind);
  void validate() const;
};

struct ProbeReport {
  double mean = 0.0;
  double std = 0.0;  // population std of the per-fold accuracies
  std::vector<double> per_fold;
};

/// Multinomial logistic regression on standardized features, trained by
/// full-batch gradient descent. The step is 1 / L with L the smoothness
/// constant of the regularized loss, so every iteration decreases it.
class LogisticRegression {
 public:
  LogisticRegression(double l2, std::size_t iterations) : l2_(l2), iterations_(iterations) {}

  /// Rows of `x` are samples; labels lie in [0, num_classes).
  void fit(const std::vector<double>& x, std::size_t rows, std::size_t cols, const std::vector<int>& labels,
           std::size_t num_classes);
  std::vector<int> predict(const std::vector<double>& x, std::size_t rows) const;
  /// Mean regularized cross-entropy on a training set (standardized inside).
  double objective(const std::vector<double>& x, std::size_t rows, const std::vector<int>& labels) const;

  const std::vector<double>& weights() const { return w_; }  // (cols + 1) x classes, bias last

 private:
  std::vector<double> standardize(const std::vector<double>& x, std::size_t rows) const;

  double l2_;
  std::size_t iterations_;
  std::size_t cols_ = 0, classes_ = 0;
  std::vector<double> mu_, sigma_, w_;
};

/// Accuracy of a linear probe over the protocol's folds or splits. `z` is
/// read only; no gradient reaches whatever produced it.
ProbeReport linear_probe(const Tensor& z, const std::vector<int>& labels, const ProbeProtocol& protocol);

/// Graphviz text of a discretized architecture: one INPUT node, one node per
/// (slot, chosen op), edges colored by factor.
std::string export_dot(const Architecture& arch);

/// Stable per-factor edge colors.
const std::string& factor_color(std::size_t k);

struct GradcheckSuiteResult {
  double max_rel_error = 0.0;
  std::string worst;  // loss, seed and parameter of the worst coordinate
  std::size_t coordinates = 0;
  std::size_t retried = 0;  // kink retries, see finite_diff_check
  std::size_t seeds = 0;
};

/// Finite-difference check of both search losses with respect to every
/// learnable tensor (weights, theta, prototypes, encoder map, head) on a
/// 3-graph batch with K=2, d=4, one run per seed.
GradcheckSuiteResult run_gradcheck_suite(std::size_t seeds = 10, std::uint64_t first_seed = 0);

/// Command-line entry. Returns 0 on success, 1 on runtime failure, 2 on
/// usage errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace dsgas
