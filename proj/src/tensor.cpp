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

#include "dsgas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dsgas {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<detail::Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

NodePtr new_node(std::size_t rows, std::size_t cols) {
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(rows * cols, 0.0);
  return n;
}

bool should_track(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

bool should_track(const std::vector<Tensor>& inputs) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Registers `fn` on the active tape and marks the output as differentiable.
template <typename Fn>
Tensor finish(NodePtr out, bool track, Fn&& fn) {
  if (track) {
    out->requires_grad = true;
    g_active_tape->record([out, fn = std::forward<Fn>(fn)]() {
      if (out->grad.empty()) return;
      fn(out->grad);
    });
  }
  return make_tensor(std::move(out));
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  require_defined(a, "unary");
  auto out = new_node(a.rows(), a.cols());
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = f(x[i]);
  const bool track = should_track({&a});
  NodePtr an = a.node();
  detail::Node* raw_out = out.get();
  return finish(out, track, [an, raw_out, dfdx](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * dfdx(an->value[i], raw_out->value[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor make_tensor(std::shared_ptr<detail::Node> node) { return Tensor(std::move(node)); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  auto n = new_node(rows, cols);
  std::fill(n->value.begin(), n->value.end(), value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("Tensor::from: expected " + std::to_string(rows * cols) + " values, got " +
                                std::to_string(values.size()));
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return full(1, 1, value, requires_grad); }

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) t.node_->value[i * n + i] = 1.0;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is " + shape_str(*this) + ", not a scalar");
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }

void Tape::backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss));
  if (loss.requires_grad()) {
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }
  entries_.clear();
  entries_.shrink_to_fit();
}

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr) throw std::logic_error("backward: no active tape on this thread");
  g_active_tape->backward(loss);
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

// ---------------------------------------------------------------------------
// SparseAdj / Segments
// ---------------------------------------------------------------------------

SparseAdj::SparseAdj(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
    : SparseAdj(num_nodes, edges, {}) {}

SparseAdj::SparseAdj(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                     const std::vector<double>& weights)
    : num_nodes_(num_nodes) {
  if (!weights.empty() && weights.size() != edges.size())
    throw std::invalid_argument("SparseAdj: weight count does not match edge count");
  std::vector<std::size_t> order(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [s, d] = edges[e];
    if (s >= num_nodes || d >= num_nodes) {
      std::ostringstream os;
      os << "SparseAdj: edge " << e << " (" << s << ", " << d << ") out of range for " << num_nodes << " nodes";
      throw std::out_of_range(os.str());
    }
    order[e] = e;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (edges[x].second != edges[y].second) return edges[x].second < edges[y].second;
    return edges[x].first < edges[y].first;
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = edges[order[k]];
    // first occurrence wins
    if (!src_.empty() && src_.back() == e.first && dst_.back() == e.second) continue;
    src_.push_back(e.first);
    dst_.push_back(e.second);
    if (!weights.empty()) weight_.push_back(weights[order[k]]);
  }
  dst_offsets_.assign(num_nodes + 1, 0);
  for (std::size_t d : dst_) ++dst_offsets_[d + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) dst_offsets_[i + 1] += dst_offsets_[i];
}

std::vector<std::pair<std::size_t, std::size_t>> SparseAdj::edge_list() const {
  std::vector<std::pair<std::size_t, std::size_t>> out(src_.size());
  for (std::size_t e = 0; e < src_.size(); ++e) out[e] = {src_[e], dst_[e]};
  return out;
}

std::vector<double> SparseAdj::densify() const {
  std::vector<double> m(num_nodes_ * num_nodes_, 0.0);
  for (std::size_t e = 0; e < src_.size(); ++e) m[dst_[e] * num_nodes_ + src_[e]] += weighted() ? weight_[e] : 1.0;
  return m;
}

void Segments::validate(std::size_t num_rows) const {
  if (ids.size() != num_rows)
    throw std::invalid_argument("segments: " + std::to_string(ids.size()) + " ids for " + std::to_string(num_rows) +
                                " rows");
  std::vector<std::size_t> seen(count, 0);
  for (std::size_t id : ids) {
    if (id >= count) throw std::out_of_range("segments: id " + std::to_string(id) + " >= " + std::to_string(count));
    ++seen[id];
  }
  for (std::size_t s = 0; s < count; ++s)
    if (seen[s] == 0) throw std::invalid_argument("segments: segment " + std::to_string(s) + " is empty");
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree " + shape_str(a) + " . " + shape_str(b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto out = new_node(m, n);
  MutMap(out->value.data(), m, n).noalias() = ConstMap(a.node()->value.data(), m, k) * ConstMap(b.node()->value.data(), k, n);
  NodePtr an = a.node(), bn = b.node();
  return finish(out, should_track({&a, &b}), [an, bn, m, k, n](const std::vector<double>& g) {
    ConstMap gm(g.data(), m, n);
    if (an->requires_grad) {
      an->ensure_grad();
      MutMap(an->grad.data(), m, k).noalias() += gm * ConstMap(bn->value.data(), k, n).transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      MutMap(bn->grad.data(), k, n).noalias() += ConstMap(an->value.data(), m, k).transpose() * gm;
    }
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul_bt");
  require_defined(b, "matmul_bt");
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_bt: inner dimensions disagree " + shape_str(a) + " . " + shape_str(b) + "^T");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  auto out = new_node(m, n);
  MutMap(out->value.data(), m, n).noalias() =
      ConstMap(a.node()->value.data(), m, k) * ConstMap(b.node()->value.data(), n, k).transpose();
  NodePtr an = a.node(), bn = b.node();
  return finish(out, should_track({&a, &b}), [an, bn, m, k, n](const std::vector<double>& g) {
    ConstMap gm(g.data(), m, n);
    if (an->requires_grad) {
      an->ensure_grad();
      MutMap(an->grad.data(), m, k).noalias() += gm * ConstMap(bn->value.data(), n, k);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      MutMap(bn->grad.data(), n, k).noalias() += gm.transpose() * ConstMap(an->value.data(), m, k);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  auto out = new_node(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[j * m + i] = a.node()->value[i * n + j];
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an, m, n](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += g[j * m + i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

namespace {

template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  require_same_shape(a, b, name);
  auto out = new_node(a.rows(), a.cols());
  const auto& x = a.node()->value;
  const auto& y = b.node()->value;
  for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = f(x[i], y[i]);
  NodePtr an = a.node(), bn = b.node();
  return finish(out, should_track({&a, &b}), [an, bn, da, db](const std::vector<double>& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * da(an->value[i], bn->value[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i] * db(an->value[i], bn->value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  require_defined(a, "scale_by");
  require_defined(s, "scale_by");
  if (s.size() != 1) throw std::invalid_argument("scale_by: factor must be 1x1, got " + shape_str(s));
  const double f = s.node()->value[0];
  auto out = new_node(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out->value[i] = a.node()->value[i] * f;
  NodePtr an = a.node(), sn = s.node();
  return finish(out, should_track({&a, &s}), [an, sn](const std::vector<double>& g) {
    const double f = sn->value[0];
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * f;
    }
    if (sn->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * an->value[i];
      sn->ensure_grad();
      sn->grad[0] += acc;
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "add_row");
  require_defined(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row: row " + shape_str(row) + " does not broadcast over " + shape_str(a));
  const std::size_t m = a.rows(), n = a.cols();
  auto out = new_node(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = a.node()->value[i * n + j] + row.node()->value[j];
  NodePtr an = a.node(), rn = row.node();
  return finish(out, should_track({&a, &row}), [an, rn, m, n](const std::vector<double>& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
    }
    if (rn->requires_grad) {
      rn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) rn->grad[j] += g[i * n + j];
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "mul_row");
  require_defined(row, "mul_row");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("mul_row: row " + shape_str(row) + " does not broadcast over " + shape_str(a));
  const std::size_t m = a.rows(), n = a.cols();
  auto out = new_node(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = a.node()->value[i * n + j] * row.node()->value[j];
  NodePtr an = a.node(), rn = row.node();
  return finish(out, should_track({&a, &row}), [an, rn, m, n](const std::vector<double>& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += g[i * n + j] * rn->value[j];
    }
    if (rn->requires_grad) {
      rn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) rn->grad[j] += g[i * n + j] * an->value[i * n + j];
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  require_defined(a, "mul_col");
  require_defined(col, "mul_col");
  if (col.cols() != 1 || col.rows() != a.rows())
    throw std::invalid_argument("mul_col: column " + shape_str(col) + " does not broadcast over " + shape_str(a));
  const std::size_t m = a.rows(), n = a.cols();
  auto out = new_node(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = a.node()->value[i * n + j] * col.node()->value[i];
  NodePtr an = a.node(), cn = col.node();
  return finish(out, should_track({&a, &col}), [an, cn, m, n](const std::vector<double>& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += g[i * n + j] * cn->value[i];
    }
    if (cn->requires_grad) {
      cn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * an->value[i * n + j];
        cn->grad[i] += acc;
      }
    }
  });
}

Tensor repeat_rows(const Tensor& row, std::size_t n) {
  require_defined(row, "repeat_rows");
  if (row.rows() != 1) throw std::invalid_argument("repeat_rows: expected a single row, got " + shape_str(row));
  const std::size_t c = row.cols();
  auto out = new_node(n, c);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(row.node()->value.begin(), c, out->value.begin() + i * c);
  NodePtr rn = row.node();
  return finish(out, should_track({&row}), [rn, n, c](const std::vector<double>& g) {
    if (!rn->requires_grad) return;
    rn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) rn->grad[j] += g[i * c + j];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  for (double v : a.values())
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary(
      a, [floor](double x) { return x > floor ? x : floor; }, [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  auto out = new_node(1, 1);
  for (double v : a.values()) out->value[0] += v;
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (double& x : an->grad) x += g[0];
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(const Tensor& a) {
  require_defined(a, "row_sum");
  const std::size_t m = a.rows(), n = a.cols();
  auto out = new_node(m, 1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i] += a.node()->value[i * n + j];
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an, m, n](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += g[i];
  });
}

Tensor row_mean(const Tensor& a) {
  require_defined(a, "row_mean");
  if (a.cols() == 0) throw std::invalid_argument("row_mean: no columns");
  return scale(row_sum(a), 1.0 / static_cast<double>(a.cols()));
}

Tensor diagonal(const Tensor& a) {
  require_defined(a, "diagonal");
  if (a.rows() != a.cols()) throw std::invalid_argument("diagonal: not square " + shape_str(a));
  const std::size_t n = a.rows();
  auto out = new_node(n, 1);
  for (std::size_t i = 0; i < n; ++i) out->value[i] = a.node()->value[i * n + i];
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an, n](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) an->grad[i * n + i] += g[i];
  });
}

Tensor element(const Tensor& a, std::size_t r, std::size_t c) {
  require_defined(a, "element");
  if (r >= a.rows() || c >= a.cols()) throw std::out_of_range("element: index outside " + shape_str(a));
  const std::size_t idx = r * a.cols() + c;
  auto out = new_node(1, 1);
  out->value[0] = a.node()->value[idx];
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an, idx](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad[idx] += g[0];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice_cols");
  if (begin > end || end > a.cols()) throw std::out_of_range("slice_cols: bad range for " + shape_str(a));
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  auto out = new_node(m, w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.node()->value.begin() + i * n + begin, w, out->value.begin() + i * w);
  NodePtr an = a.node();
  return finish(out, should_track({&a}), [an, m, n, w, begin](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) an->grad[i * n + begin + j] += g[i * w + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (p.rows() != m) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
  }
  auto out = new_node(m, total);
  std::vector<NodePtr> nodes;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.node()->value.begin() + i * w, w, out->value.begin() + i * total + offset);
    offset += w;
    nodes.push_back(p.node());
  }
  return finish(out, should_track(parts), [nodes, m, total](const std::vector<double>& g) {
    std::size_t offset = 0;
    for (const auto& pn : nodes) {
      const std::size_t w = pn->cols;
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) pn->grad[i * w + j] += g[i * total + offset + j];
      }
      offset += w;
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  require_defined(a, "gather_rows");
  const std::size_t n = a.cols();
  auto out = new_node(index.size(), n);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= a.rows()) throw std::out_of_range("gather_rows: row index out of range");
    std::copy_n(a.node()->value.begin() + index[e] * n, n, out->value.begin() + e * n);
  }
  NodePtr an = a.node();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return finish(out, should_track({&a}), [an, idx = std::move(idx), n](const std::vector<double>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < n; ++j) an->grad[idx[e] * n + j] += g[e * n + j];
  });
}

Tensor max_elementwise(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("max_elementwise: no inputs");
  for (const auto& p : parts) require_same_shape(parts.front(), p, "max_elementwise");
  const std::size_t size = parts.front().size();
  auto out = new_node(parts.front().rows(), parts.front().cols());
  std::vector<std::uint32_t> arg(size, 0);
  for (std::size_t i = 0; i < size; ++i) {
    double best = parts[0].node()->value[i];
    for (std::size_t p = 1; p < parts.size(); ++p) {
      const double v = parts[p].node()->value[i];
      if (v > best) {
        best = v;
        arg[i] = static_cast<std::uint32_t>(p);
      }
    }
    out->value[i] = best;
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return finish(out, should_track(parts), [nodes, arg = std::move(arg)](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto& pn = nodes[arg[i]];
      if (!pn->requires_grad) continue;
      pn->ensure_grad();
      pn->grad[i] += g[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax family and normalization
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& x, double temperature) {
  require_defined(x, "softmax_rows");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_rows: temperature must be > 0");
  const std::size_t m = x.rows(), n = x.cols();
  auto out = new_node(m, n);
  const auto& v = x.node()->value;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double* o = out->value.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp((row[j] - mx) / temperature);
      z += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  NodePtr xn = x.node();
  detail::Node* y = out.get();
  return finish(out, should_track({&x}), [xn, y, m, n, temperature](const std::vector<double>& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y->value[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        xn->grad[i * n + j] += y->value[i * n + j] * (g[i * n + j] - dot) / temperature;
    }
  });
}

Tensor logsumexp_rows(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_defined(x, "logsumexp_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (!mask.empty() && mask.size() != m * n) throw std::invalid_argument("logsumexp_rows: mask size mismatch");
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  if (keep.empty()) keep.assign(m * n, 1);
  auto out = new_node(m, 1);
  std::vector<double> weights(m * n, 0.0);  // softmax over kept entries
  const auto& v = x.node()->value;
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (keep[i * n + j]) mx = std::max(mx, v[i * n + j]);
    if (!std::isfinite(mx)) throw std::invalid_argument("logsumexp_rows: row " + std::to_string(i) + " fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (keep[i * n + j]) {
        weights[i * n + j] = std::exp(v[i * n + j] - mx);
        z += weights[i * n + j];
      }
    for (std::size_t j = 0; j < n; ++j) weights[i * n + j] /= z;
    out->value[i] = mx + std::log(z);
  }
  NodePtr xn = x.node();
  return finish(out, should_track({&x}), [xn, weights = std::move(weights), m, n](const std::vector<double>& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += g[i] * weights[i * n + j];
  });
}

namespace {

// Standardizes `count` groups of `len` entries, group g element t at
// offset(g, t). Shared by the column and row variants.
template <typename Offset>
Tensor standardize(const Tensor& x, std::size_t count, std::size_t len, double eps, Offset offset) {
  auto out = new_node(x.rows(), x.cols());
  std::vector<double> inv_std(count);
  const auto& v = x.node()->value;
  for (std::size_t gi = 0; gi < count; ++gi) {
    double mu = 0.0;
    for (std::size_t t = 0; t < len; ++t) mu += v[offset(gi, t)];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double d = v[offset(gi, t)] - mu;
      var += d * d;
    }
    var /= static_cast<double>(len);
    inv_std[gi] = 1.0 / std::sqrt(var + eps);
    for (std::size_t t = 0; t < len; ++t) out->value[offset(gi, t)] = (v[offset(gi, t)] - mu) * inv_std[gi];
  }
  NodePtr xn = x.node();
  detail::Node* y = out.get();
  return finish(out, should_track({&x}),
                [xn, y, inv_std = std::move(inv_std), count, len, offset](const std::vector<double>& g) {
                  if (!xn->requires_grad) return;
                  xn->ensure_grad();
                  const double inv_len = 1.0 / static_cast<double>(len);
                  for (std::size_t gi = 0; gi < count; ++gi) {
                    double mg = 0.0, mgy = 0.0;
                    for (std::size_t t = 0; t < len; ++t) {
                      const std::size_t o = offset(gi, t);
                      mg += g[o];
                      mgy += g[o] * y->value[o];
                    }
                    mg *= inv_len;
                    mgy *= inv_len;
                    for (std::size_t t = 0; t < len; ++t) {
                      const std::size_t o = offset(gi, t);
                      xn->grad[o] += inv_std[gi] * (g[o] - mg - y->value[o] * mgy);
                    }
                  }
                });
}

}  // namespace

Tensor normalize_cols(const Tensor& x, double eps) {
  require_defined(x, "normalize_cols");
  if (x.rows() == 0) throw std::invalid_argument("normalize_cols: no rows");
  const std::size_t n = x.cols();
  return standardize(x, x.cols(), x.rows(), eps, [n](std::size_t col, std::size_t row) { return row * n + col; });
}

Tensor normalize_rows(const Tensor& x, double eps) {
  require_defined(x, "normalize_rows");
  if (x.cols() == 0) throw std::invalid_argument("normalize_rows: no columns");
  const std::size_t n = x.cols();
  return standardize(x, x.rows(), x.cols(), eps, [n](std::size_t row, std::size_t col) { return row * n + col; });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  require_defined(x, "l2_normalize_rows");
  const std::size_t m = x.rows(), n = x.cols();
  auto out = new_node(m, n);
  std::vector<double> norms(m);
  const auto& v = x.node()->value;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += v[i * n + j] * v[i * n + j];
    norms[i] = std::sqrt(s + eps);
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = v[i * n + j] / norms[i];
  }
  NodePtr xn = x.node();
  detail::Node* y = out.get();
  return finish(out, should_track({&x}), [xn, y, norms = std::move(norms), m, n](const std::vector<double>& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y->value[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        xn->grad[i * n + j] += (g[i * n + j] - y->value[i * n + j] * dot) / norms[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Sparse products and segment reductions
// ---------------------------------------------------------------------------

namespace {

Tensor spmm_impl(const SparseAdj& adj, const Tensor& x, const Tensor* edge_weight) {
  require_defined(x, "spmm");
  if (adj.num_nodes() != x.rows())
    throw std::invalid_argument("spmm: adjacency over " + std::to_string(adj.num_nodes()) + " nodes, features " +
                                shape_str(x));
  const std::size_t n = x.cols(), E = adj.num_edges();
  std::vector<double> w(E, 1.0);
  if (edge_weight != nullptr) {
    if (edge_weight->rows() != E || edge_weight->cols() != 1)
      throw std::invalid_argument("spmm: edge weights " + shape_str(*edge_weight) + " for " + std::to_string(E) +
                                  " edges");
    std::copy(edge_weight->values().begin(), edge_weight->values().end(), w.begin());
  } else if (adj.weighted()) {
    w = adj.weights();
  }
  auto out = new_node(x.rows(), n);
  const auto& src = adj.src();
  const auto& dst = adj.dst();
  const auto& xv = x.node()->value;
  for (std::size_t e = 0; e < E; ++e) {
    const double* xr = xv.data() + src[e] * n;
    double* o = out->value.data() + dst[e] * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += w[e] * xr[j];
  }
  NodePtr xn = x.node();
  NodePtr wn = edge_weight != nullptr ? edge_weight->node() : nullptr;
  const bool track = edge_weight != nullptr ? should_track({&x, edge_weight}) : should_track({&x});
  // Index arrays are copied so the closure stays valid past adj's lifetime.
  return finish(out, track, [xn, wn, w = std::move(w), src, dst, n](const std::vector<double>& g) {
    const std::size_t E = src.size();
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t e = 0; e < E; ++e) {
        const double* gr = g.data() + dst[e] * n;
        double* xg = xn->grad.data() + src[e] * n;
        for (std::size_t j = 0; j < n; ++j) xg[j] += w[e] * gr[j];
      }
    }
    if (wn && wn->requires_grad) {
      wn->ensure_grad();
      for (std::size_t e = 0; e < E; ++e) {
        const double* gr = g.data() + dst[e] * n;
        const double* xr = xn->value.data() + src[e] * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += gr[j] * xr[j];
        wn->grad[e] += acc;
      }
    }
  });
}

}  // namespace

Tensor spmm(const SparseAdj& adj, const Tensor& x) { return spmm_impl(adj, x, nullptr); }

Tensor spmm(const SparseAdj& adj, const Tensor& x, const Tensor& edge_weight) {
  require_defined(edge_weight, "spmm");
  return spmm_impl(adj, x, &edge_weight);
}

Tensor segment_reduce(const Tensor& x, const Segments& segments, ReduceMode mode) {
  require_defined(x, "segment_reduce");
  segments.validate(x.rows());
  const std::size_t rows = x.rows(), n = x.cols(), groups = segments.count;
  auto out = new_node(groups, n);
  std::vector<double> counts(groups, 0.0);
  for (std::size_t id : segments.ids) counts[id] += 1.0;
  const auto& v = x.node()->value;
  std::vector<std::size_t> argmax;
  if (mode == ReduceMode::kMax) {
    argmax.assign(groups * n, std::numeric_limits<std::size_t>::max());
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t s = segments.ids[r];
      for (std::size_t j = 0; j < n; ++j) {
        std::size_t& a = argmax[s * n + j];
        // strict comparison keeps the lowest row index on ties
        if (a == std::numeric_limits<std::size_t>::max() || v[r * n + j] > v[a * n + j]) a = r;
      }
    }
    for (std::size_t i = 0; i < groups * n; ++i) out->value[i] = v[argmax[i] * n + i % n];
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t s = segments.ids[r];
      for (std::size_t j = 0; j < n; ++j) out->value[s * n + j] += v[r * n + j];
    }
    if (mode == ReduceMode::kMean)
      for (std::size_t s = 0; s < groups; ++s)
        for (std::size_t j = 0; j < n; ++j) out->value[s * n + j] /= counts[s];
  }
  NodePtr xn = x.node();
  return finish(out, should_track({&x}),
                [xn, ids = segments.ids, counts = std::move(counts), argmax = std::move(argmax), mode, n,
                 groups](const std::vector<double>& g) {
                  if (!xn->requires_grad) return;
                  xn->ensure_grad();
                  if (mode == ReduceMode::kMax) {
                    for (std::size_t i = 0; i < groups * n; ++i) xn->grad[argmax[i] * n + i % n] += g[i];
                    return;
                  }
                  for (std::size_t r = 0; r < ids.size(); ++r) {
                    const std::size_t s = ids[r];
                    const double f = mode == ReduceMode::kMean ? 1.0 / counts[s] : 1.0;
                    for (std::size_t j = 0; j < n; ++j) xn->grad[r * n + j] += f * g[s * n + j];
                  }
                });
}

Tensor segment_softmax(const Tensor& scores, const Segments& segments) {
  require_defined(scores, "segment_softmax");
  if (scores.cols() != 1) throw std::invalid_argument("segment_softmax: expected a column, got " + shape_str(scores));
  segments.validate(scores.rows());
  const std::size_t rows = scores.rows();
  const auto& v = scores.node()->value;
  std::vector<double> mx(segments.count, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < rows; ++r) mx[segments.ids[r]] = std::max(mx[segments.ids[r]], v[r]);
  auto out = new_node(rows, 1);
  std::vector<double> z(segments.count, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    out->value[r] = std::exp(v[r] - mx[segments.ids[r]]);
    z[segments.ids[r]] += out->value[r];
  }
  for (std::size_t r = 0; r < rows; ++r) out->value[r] /= z[segments.ids[r]];
  NodePtr sn = scores.node();
  detail::Node* y = out.get();
  return finish(out, should_track({&scores}),
                [sn, y, ids = segments.ids, count = segments.count](const std::vector<double>& g) {
                  if (!sn->requires_grad) return;
                  sn->ensure_grad();
                  std::vector<double> dot(count, 0.0);
                  for (std::size_t r = 0; r < ids.size(); ++r) dot[ids[r]] += g[r] * y->value[r];
                  for (std::size_t r = 0; r < ids.size(); ++r) sn->grad[r] += y->value[r] * (g[r] - dot[ids[r]]);
                });
}

std::uint64_t hash_values(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t r = t.rows(), c = t.cols();
  mix(&r, sizeof r);
  mix(&c, sizeof c);
  mix(t.values().data(), t.size() * sizeof(double));
  return h;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace dsgas
