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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dsgas {

namespace detail {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major 2-D tensor of doubles with optional gradient buffer.
///
/// A Tensor is a cheap handle: copies share the same storage. Scalars are
/// 1x1 tensors. Operations that see an input with requires_grad() while a
/// Tape is active on the calling thread record themselves on that tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  /// Direct write access; intended for parameter initialization and optimizers.
  std::span<double> mutable_values() { return node_->value; }

  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; empty span when nothing has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Deep copy of the values with no gradient tracking.
  Tensor detach() const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_tensor(std::shared_ptr<detail::Node>);
};

Tensor make_tensor(std::shared_ptr<detail::Node> node);

/// Ordered record of differentiable operations.
///
/// Constructing a Tape makes it the active tape of the current thread until it
/// is destroyed. Entries are appended in execution order, so the record is
/// topologically sorted by construction; backward() replays it in reverse.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::function<void()> backward_fn);
  std::size_t size() const { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1, runs every entry in reverse and frees the tape.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> entries_;
  Tape* previous_;
};

/// backward() on the calling thread's active tape.
void backward(const Tensor& loss);

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

/// Sparse adjacency as a (src, dst) edge list. Edges are deduplicated and
/// stored sorted by (dst, src), so rows of the aggregation are contiguous.
class SparseAdj {
 public:
  SparseAdj() = default;
  SparseAdj(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  SparseAdj(std::size_t num_nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
            const std::vector<double>& weights);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return src_.size(); }
  const std::vector<std::size_t>& src() const { return src_; }
  const std::vector<std::size_t>& dst() const { return dst_; }
  bool weighted() const { return !weight_.empty(); }
  const std::vector<double>& weights() const { return weight_; }
  /// Offsets into the edge arrays per destination node (size num_nodes + 1).
  const std::vector<std::size_t>& dst_offsets() const { return dst_offsets_; }

  std::vector<std::pair<std::size_t, std::size_t>> edge_list() const;
  /// Dense num_nodes x num_nodes matrix M with M[dst][src] = weight.
  std::vector<double> densify() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::size_t> src_;
  std::vector<std::size_t> dst_;
  std::vector<double> weight_;
  std::vector<std::size_t> dst_offsets_;
};

/// Node -> segment map, e.g. node -> graph within a batch.
struct Segments {
  std::vector<std::size_t> ids;
  std::size_t count = 0;

  void validate(std::size_t num_rows) const;
};

enum class ReduceMode { kSum, kMean, kMax };

// ---------------------------------------------------------------------------
// Differentiable primitives. All throw std::invalid_argument on shape errors.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a . b^T without materializing the transpose.
Tensor matmul_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// a * s for a 1x1 tensor s (gradient flows to s).
Tensor scale_by(const Tensor& a, const Tensor& s);
/// a[r, c] + row[0, c]
Tensor add_row(const Tensor& a, const Tensor& row);
/// a[r, c] * row[0, c]
Tensor mul_row(const Tensor& a, const Tensor& row);
/// a[r, c] * col[r, 0]
Tensor mul_col(const Tensor& a, const Tensor& col);
Tensor repeat_rows(const Tensor& row, std::size_t n);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// max(a, floor) elementwise; gradient passes only where a > floor.
Tensor clamp_min(const Tensor& a, double floor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row sums, r x 1.
Tensor row_sum(const Tensor& a);
/// Per-row means, r x 1.
Tensor row_mean(const Tensor& a);
Tensor diagonal(const Tensor& a);
/// 1x1 tensor holding a[r, c].
Tensor element(const Tensor& a, std::size_t r, std::size_t c);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
/// Elementwise max across equally shaped tensors; ties go to the earliest.
Tensor max_elementwise(const std::vector<Tensor>& parts);

/// Row softmax of x / temperature, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& x, double temperature = 1.0);
/// log sum_j exp(x[r, j]) over entries with mask[r * cols + j] != 0 (all when
/// mask is empty). Result r x 1.
Tensor logsumexp_rows(const Tensor& x, std::span<const std::uint8_t> mask = {});

/// Per-column standardization (x - mean) / sqrt(var + eps), biased variance.
Tensor normalize_cols(const Tensor& x, double eps = 1e-5);
/// Per-row standardization.
Tensor normalize_rows(const Tensor& x, double eps = 1e-5);
/// Rows divided by sqrt(|x_i|^2 + eps): unit norm away from the origin and
/// smooth through it.
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

/// out[i] = sum over edges (j -> i) of weight(j, i) * x[j].
Tensor spmm(const SparseAdj& adj, const Tensor& x);
/// spmm with per-edge weights supplied as an E x 1 tensor (differentiable).
Tensor spmm(const SparseAdj& adj, const Tensor& x, const Tensor& edge_weight);

Tensor segment_reduce(const Tensor& x, const Segments& segments, ReduceMode mode);
/// Softmax of a column vector within each segment.
Tensor segment_softmax(const Tensor& scores, const Segments& segments);

/// Stable-ish FNV-1a over the raw bytes of the values.
std::uint64_t hash_values(const Tensor& t);

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS. Training allocates and frees the same large buffers every step; with
/// glibc's default thresholds each one is a fresh mmap plus page faults.
/// No-op on other C libraries. Call once from main.
void tune_allocator();

}  // namespace dsgas
