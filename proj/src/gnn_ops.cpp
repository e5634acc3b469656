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

#include "dsgas/gnn_ops.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace dsgas {

namespace {

struct OpInfo {
  OpId id;
  OpCategory category;
  std::string_view name;
};

constexpr std::array<OpInfo, 14> kOps{{
    {OpId::kGcn, OpCategory::kAgg, "GCN"},
    {OpId::kGat, OpCategory::kAgg, "GAT"},
    {OpId::kGin, OpCategory::kAgg, "GIN"},
    {OpId::kGraphSage, OpCategory::kAgg, "GraphSage"},
    {OpId::kGraphConv, OpCategory::kAgg, "GraphConv"},
    {OpId::kMlp, OpCategory::kAgg, "MLP"},
    {OpId::kMeanPool, OpCategory::kPool, "MeanPool"},
    {OpId::kMaxPool, OpCategory::kPool, "MaxPool"},
    {OpId::kSumPool, OpCategory::kPool, "SumPool"},
    {OpId::kAttentionPool, OpCategory::kPool, "AttentionPool"},
    {OpId::kMaxMerge, OpCategory::kMerge, "MaxMerge"},
    {OpId::kConcatMerge, OpCategory::kMerge, "ConcatMerge"},
    {OpId::kSumMerge, OpCategory::kMerge, "SumMerge"},
    {OpId::kMeanMerge, OpCategory::kMerge, "MeanMerge"},
}};

const OpInfo& info(OpId id) { return kOps.at(static_cast<std::size_t>(id)); }

void require_category(OpId id, OpCategory expected, const char* fn) {
  if (category_of(id) != expected)
    throw std::invalid_argument(std::string(fn) + ": " + std::string(op_name(id)) + " is not in this category");
}

Tensor zeros_row(std::size_t n) { return Tensor::zeros(1, n, true); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_row(matmul(x, w), b); }

}  // namespace

OpCategory category_of(OpId id) { return info(id).category; }

std::string_view op_name(OpId id) { return info(id).name; }

OpId op_from_name(std::string_view name) {
  for (const auto& op : kOps)
    if (op.name == name) return op.id;
  throw std::invalid_argument("unknown operation '" + std::string(name) + "'");
}

const std::vector<OpId>& agg_candidates() {
  static const std::vector<OpId> ops{OpId::kGcn, OpId::kGat, OpId::kGin, OpId::kGraphSage, OpId::kGraphConv, OpId::kMlp};
  return ops;
}

const std::vector<OpId>& pool_candidates() {
  static const std::vector<OpId> ops{OpId::kMeanPool, OpId::kMaxPool, OpId::kSumPool, OpId::kAttentionPool};
  return ops;
}

const std::vector<OpId>& merge_candidates() {
  static const std::vector<OpId> ops{OpId::kMaxMerge, OpId::kConcatMerge, OpId::kSumMerge, OpId::kMeanMerge};
  return ops;
}

std::size_t OpWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = uniform(rng, -limit, limit);
  return Tensor::from(fan_in, fan_out, std::move(v), true);
}

OpWeights init_op_weights(OpId id, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  OpWeights w;
  w.id = id;
  auto& t = w.tensors;
  switch (id) {
    case OpId::kGcn:
    case OpId::kMlp:
      t.push_back({"W", glorot_uniform(in_dim, out_dim, rng)});
      t.push_back({"b", zeros_row(out_dim)});
      break;
    case OpId::kGat:
      t.push_back({"W", glorot_uniform(in_dim, out_dim, rng)});
      t.push_back({"att_src", glorot_uniform(out_dim, 1, rng)});
      t.push_back({"att_dst", glorot_uniform(out_dim, 1, rng)});
      t.push_back({"b", zeros_row(out_dim)});
      break;
    case OpId::kGin:
      t.push_back({"eps", Tensor::scalar(0.0, true)});
      t.push_back({"W1", glorot_uniform(in_dim, out_dim, rng)});
      t.push_back({"b1", zeros_row(out_dim)});
      t.push_back({"W2", glorot_uniform(out_dim, out_dim, rng)});
      t.push_back({"b2", zeros_row(out_dim)});
      break;
    case OpId::kGraphSage:
    case OpId::kGraphConv:
      t.push_back({"W_self", glorot_uniform(in_dim, out_dim, rng)});
      t.push_back({"W_neigh", glorot_uniform(in_dim, out_dim, rng)});
      t.push_back({"b", zeros_row(out_dim)});
      break;
    case OpId::kAttentionPool:
      t.push_back({"gate", glorot_uniform(in_dim, 1, rng)});
      break;
    default:
      break;
  }
  return w;
}

Tensor apply_agg(OpId id, const Tensor& h, const AdjacencyViews& views, const OpWeights& weights) {
  require_category(id, OpCategory::kAgg, "apply_agg");
  if (weights.id != id) throw std::invalid_argument("apply_agg: weights belong to " + std::string(op_name(weights.id)));
  switch (id) {
    case OpId::kGcn:
      return add_row(spmm(views.gcn, matmul(h, weights.at(0))), weights.at(1));
    case OpId::kGat: {
      const Tensor wh = matmul(h, weights.at(0));
      const Tensor s_src = matmul(wh, weights.at(1));
      const Tensor s_dst = matmul(wh, weights.at(2));
      const SparseAdj& adj = views.loops;
      const Tensor logits = leaky_relu(add(gather_rows(s_dst, adj.dst()), gather_rows(s_src, adj.src())), kGatSlope);
      const Tensor attention = segment_softmax(logits, Segments{adj.dst(), adj.num_nodes()});
      return add_row(spmm(adj, wh, attention), weights.at(3));
    }
    case OpId::kGin: {
      const Tensor self = add(h, scale_by(h, weights.at(0)));
      const Tensor combined = add(self, spmm(views.raw, h));
      const Tensor hidden = relu(linear(combined, weights.at(1), weights.at(2)));
      return linear(hidden, weights.at(3), weights.at(4));
    }
    case OpId::kGraphSage:
      return add_row(add(matmul(h, weights.at(0)), matmul(spmm(views.mean, h), weights.at(1))), weights.at(2));
    case OpId::kGraphConv:
      return add_row(add(matmul(h, weights.at(0)), matmul(spmm(views.raw, h), weights.at(1))), weights.at(2));
    case OpId::kMlp:
      return linear(h, weights.at(0), weights.at(1));
    default:
      break;
  }
  throw std::logic_error("apply_agg: unhandled operation");
}

Tensor apply_pool(OpId id, const Tensor& h, const Segments& segments, const OpWeights& weights) {
  require_category(id, OpCategory::kPool, "apply_pool");
  switch (id) {
    case OpId::kMeanPool:
      return segment_reduce(h, segments, ReduceMode::kMean);
    case OpId::kMaxPool:
      return segment_reduce(h, segments, ReduceMode::kMax);
    case OpId::kSumPool:
      return segment_reduce(h, segments, ReduceMode::kSum);
    case OpId::kAttentionPool: {
      if (weights.id != id) throw std::invalid_argument("apply_pool: missing attention gate");
      const Tensor gate = segment_softmax(matmul(h, weights.at(0)), segments);
      return segment_reduce(mul_col(h, gate), segments, ReduceMode::kSum);
    }
    default:
      break;
  }
  throw std::logic_error("apply_pool: unhandled operation");
}

Tensor apply_merge(OpId id, const std::vector<Tensor>& layers) {
  require_category(id, OpCategory::kMerge, "apply_merge");
  if (layers.empty()) throw std::invalid_argument("apply_merge: no layer outputs");
  for (const auto& l : layers)
    if (l.rows() != layers.front().rows() || l.cols() != layers.front().cols())
      throw std::invalid_argument("apply_merge: layer outputs differ in shape");
  switch (id) {
    case OpId::kMaxMerge:
      return layers.size() == 1 ? layers.front() : max_elementwise(layers);
    case OpId::kConcatMerge:
      return layers.size() == 1 ? layers.front() : concat_cols(layers);
    case OpId::kSumMerge:
    case OpId::kMeanMerge: {
      Tensor acc = layers.front();
      for (std::size_t i = 1; i < layers.size(); ++i) acc = add(acc, layers[i]);
      return id == OpId::kSumMerge || layers.size() == 1 ? acc : scale(acc, 1.0 / static_cast<double>(layers.size()));
    }
    default:
      break;
  }
  throw std::logic_error("apply_merge: unhandled operation");
}

}  // namespace dsgas
