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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dsgas/evalcli.hpp"
#include "dsgas/random.hpp"

namespace dsgas {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const char* to_string(ProbeKind kind) {
  return kind == ProbeKind::kGraphFolds ? "logreg_10fold_graph" : "logreg_splits_node";
}

ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "logreg_10fold_graph") return ProbeKind::kGraphFolds;
  if (s == "logreg_splits_node") return ProbeKind::kNodeSplits;
  throw std::invalid_argument("unknown probe protocol '" + s + "' (expected logreg_10fold_graph|logreg_splits_node)");
}

ProbeProtocol ProbeProtocol::defaults_for(ProbeKind kind) {
  ProbeProtocol p;
  p.kind = kind;
  return p;
}

void ProbeProtocol::validate() const {
  if (kind == ProbeKind::kGraphFolds && (folds < 2 || repetitions == 0))
    throw std::invalid_argument("probe: need folds >= 2 and repetitions >= 1");
  if (kind == ProbeKind::kNodeSplits) {
    if (splits == 0) throw std::invalid_argument("probe: need splits >= 1");
    if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction >= 1.0)
      throw std::invalid_argument("probe: train/val fractions must be positive and sum below 1");
  }
  if (!(l2 >= 0.0)) throw std::invalid_argument("probe: l2 must be >= 0");
  if (iterations == 0) throw std::invalid_argument("probe: iterations must be positive");
}

std::vector<double> LogisticRegression::standardize(const std::vector<double>& x, std::size_t rows) const {
  if (x.size() != rows * cols_) throw std::invalid_argument("logistic regression: feature width changed");
  std::vector<double> out((cols_ + 1) * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[i * (cols_ + 1) + j] = (x[i * cols_ + j] - mu_[j]) / sigma_[j];
    out[i * (cols_ + 1) + cols_] = 1.0;
  }
  return out;
}

namespace {

// Row-wise softmax in place.
void softmax_rows_inplace(RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

}  // namespace

void LogisticRegression::fit(const std::vector<double>& x, std::size_t rows, std::size_t cols,
                             const std::vector<int>& labels, std::size_t num_classes) {
  if (rows == 0 || labels.size() != rows || x.size() != rows * cols)
    throw std::invalid_argument("logistic regression: inconsistent training data");
  cols_ = cols;
  classes_ = num_classes;
  mu_.assign(cols, 0.0);
  sigma_.assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) mu_[j] += x[i * cols + j];
  for (double& m : mu_) m /= static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) sigma_[j] += (x[i * cols + j] - mu_[j]) * (x[i * cols + j] - mu_[j]);
  for (double& s : sigma_) {
    s = std::sqrt(s / static_cast<double>(rows));
    if (s < 1e-12) s = 1.0;  // constant column
  }

  const std::vector<double> xs = standardize(x, rows);
  const Eigen::Index n = static_cast<Eigen::Index>(rows), D = static_cast<Eigen::Index>(cols + 1),
                     C = static_cast<Eigen::Index>(num_classes);
  const Eigen::Map<const RowMatrix> X(xs.data(), n, D);
  RowMatrix Y = RowMatrix::Zero(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= C) throw std::invalid_argument("logistic regression: label out of range");
    Y(i, y) = 1.0;
  }

  // Softmax cross-entropy has Hessian below (1/2) X^T X / n per class block.
  const Eigen::MatrixXd gram = (X.transpose() * X) / static_cast<double>(n);
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / (0.5 * lmax + l2_);

  RowMatrix W = RowMatrix::Zero(D, C);
  for (std::size_t it = 0; it < iterations_; ++it) {
    RowMatrix P = X * W;
    softmax_rows_inplace(P);
    RowMatrix G = X.transpose() * (P - Y) / static_cast<double>(n);
    G.topRows(D - 1) += l2_ * W.topRows(D - 1);  // bias row unregularized
    W -= step * G;
  }
  w_.assign(W.data(), W.data() + W.size());
}

std::vector<int> LogisticRegression::predict(const std::vector<double>& x, std::size_t rows) const {
  const std::vector<double> xs = standardize(x, rows);
  const Eigen::Map<const RowMatrix> X(xs.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols_ + 1));
  const Eigen::Map<const RowMatrix> W(w_.data(), static_cast<Eigen::Index>(cols_ + 1), static_cast<Eigen::Index>(classes_));
  const RowMatrix S = X * W;
  std::vector<int> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < S.cols(); ++c)
      if (S(static_cast<Eigen::Index>(i), c) > S(static_cast<Eigen::Index>(i), best)) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double LogisticRegression::objective(const std::vector<double>& x, std::size_t rows, const std::vector<int>& labels) const {
  const std::vector<double> xs = standardize(x, rows);
  const Eigen::Index D = static_cast<Eigen::Index>(cols_ + 1), C = static_cast<Eigen::Index>(classes_);
  const Eigen::Map<const RowMatrix> X(xs.data(), static_cast<Eigen::Index>(rows), D);
  const Eigen::Map<const RowMatrix> W(w_.data(), D, C);
  RowMatrix P = X * W;
  softmax_rows_inplace(P);
  double loss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) loss -= std::log(std::max(P(static_cast<Eigen::Index>(i), labels[i]), 1e-300));
  loss /= static_cast<double>(rows);
  return loss + 0.5 * l2_ * W.topRows(D - 1).squaredNorm();
}

namespace {

struct Split {
  std::vector<std::size_t> train, test;
};

std::size_t distinct(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::set<int> s;
  for (std::size_t i : idx) s.insert(labels[i]);
  return s.size();
}

std::vector<std::vector<std::size_t>> by_class(const std::vector<int>& labels, std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> out(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

// Stratified fold ids: each class is shuffled and dealt round-robin, with the
// deal continuing across classes so fold sizes differ by at most one.
std::vector<Split> stratified_folds(const std::vector<int>& labels, std::size_t num_classes, std::size_t folds,
                                    Rng& rng) {
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t offset = 0;
  for (auto& members : by_class(labels, num_classes)) {
    shuffle(members, rng);
    for (std::size_t j = 0; j < members.size(); ++j) fold_of[members[j]] = (offset + j) % folds;
    offset += members.size();
  }
  std::vector<Split> out(folds);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t f = 0; f < folds; ++f) (fold_of[i] == f ? out[f].test : out[f].train).push_back(i);
  return out;
}

Split stratified_split(const std::vector<int>& labels, std::size_t num_classes, double train_fraction,
                       double val_fraction, Rng& rng) {
  Split s;
  for (auto& members : by_class(labels, num_classes)) {
    if (members.empty()) continue;
    shuffle(members, rng);
    const double n = static_cast<double>(members.size());
    const std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(train_fraction * n)));
    const std::size_t n_val =
        std::min(members.size() - std::min(members.size(), n_train), static_cast<std::size_t>(std::llround(val_fraction * n)));
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (j < n_train)
        s.train.push_back(members[j]);
      else if (j >= n_train + n_val)
        s.test.push_back(members[j]);
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double evaluate(const std::vector<double>& z, std::size_t cols, const std::vector<int>& labels,
                std::size_t num_classes, const Split& split, const ProbeProtocol& p) {
  auto gather = [&](const std::vector<std::size_t>& idx, std::vector<double>& x, std::vector<int>& y) {
    x.clear();
    y.clear();
    for (std::size_t i : idx) {
      x.insert(x.end(), z.begin() + static_cast<std::ptrdiff_t>(i * cols),
               z.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
      y.push_back(labels[i]);
    }
  };
  std::vector<double> xtr, xte;
  std::vector<int> ytr, yte;
  gather(split.train, xtr, ytr);
  gather(split.test, xte, yte);
  LogisticRegression model(p.l2, p.iterations);
  model.fit(xtr, ytr.size(), cols, ytr, num_classes);
  const auto pred = model.predict(xte, yte.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < yte.size(); ++i) hit += pred[i] == yte[i];
  return static_cast<double>(hit) / static_cast<double>(yte.size());
}

constexpr int kRestratifyAttempts = 10;

}  // namespace

ProbeReport linear_probe(const Tensor& z, const std::vector<int>& labels, const ProbeProtocol& protocol) {
  protocol.validate();
  if (z.rows() != labels.size()) throw std::invalid_argument("linear_probe: one label per embedding row required");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("linear_probe: labels must be non-negative");
    max_label = std::max(max_label, y);
  }
  const auto num_classes = static_cast<std::size_t>(max_label + 1);
  const std::vector<double> values(z.values().begin(), z.values().end());
  const std::size_t cols = z.cols();

  ProbeReport report;
  if (protocol.kind == ProbeKind::kGraphFolds) {
    if (labels.size() < protocol.folds) throw std::invalid_argument("linear_probe: fewer samples than folds");
    for (std::size_t rep = 0; rep < protocol.repetitions; ++rep) {
      Rng rng = make_rng(protocol.seed, Stream::kProbe, rep);
      std::vector<Split> folds;
      for (int attempt = 0;; ++attempt) {
        folds = stratified_folds(labels, num_classes, protocol.folds, rng);
        bool ok = true;
        for (const Split& f : folds) ok = ok && distinct(labels, f.train) >= 2;
        if (ok) break;
        if (attempt + 1 == kRestratifyAttempts)
          throw std::runtime_error("linear_probe: a training fold keeps a single class");
      }
      for (const Split& f : folds) report.per_fold.push_back(evaluate(values, cols, labels, num_classes, f, protocol));
    }
  } else {
    for (std::size_t s = 0; s < protocol.splits; ++s) {
      Rng rng = make_rng(protocol.seed, Stream::kProbe, s);
      Split split;
      for (int attempt = 0;; ++attempt) {
        split = stratified_split(labels, num_classes, protocol.train_fraction, protocol.val_fraction, rng);
        if (distinct(labels, split.train) >= 2 && !split.test.empty()) break;
        if (attempt + 1 == kRestratifyAttempts)
          throw std::runtime_error("linear_probe: a training split keeps a single class");
      }
      report.per_fold.push_back(evaluate(values, cols, labels, num_classes, split, protocol));
    }
  }

  double sum = 0.0;
  for (double a : report.per_fold) sum += a;
  report.mean = sum / static_cast<double>(report.per_fold.size());
  double var = 0.0;
  for (double a : report.per_fold) var += (a - report.mean) * (a - report.mean);
  report.std = std::sqrt(var / static_cast<double>(report.per_fold.size()));
  return report;
}

}  // namespace dsgas
