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

#include <string>
#include <string_view>
#include <vector>

#include "dsgas/graph.hpp"
#include "dsgas/random.hpp"
#include "dsgas/tensor.hpp"

namespace dsgas {

enum class OpCategory { kAgg, kPool, kMerge };

enum class OpId {
  // node aggregation
  kGcn,
  kGat,
  kGin,
  kGraphSage,
  kGraphConv,
  kMlp,
  // graph pooling
  kMeanPool,
  kMaxPool,
  kSumPool,
  kAttentionPool,
  // layer merging
  kMaxMerge,
  kConcatMerge,
  kSumMerge,
  kMeanMerge,
};

OpCategory category_of(OpId id);
/// Stable names used in config files, checkpoints and DOT output.
std::string_view op_name(OpId id);
OpId op_from_name(std::string_view name);

/// Candidate pools, in slot order (index i of a logit row is pool[i]).
const std::vector<OpId>& agg_candidates();
const std::vector<OpId>& pool_candidates();
const std::vector<OpId>& merge_candidates();

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Learnable tensors of one candidate operation.
///   GCN / MLP:            W, b
///   GAT:                  W, att_src, att_dst, b   (one head, LeakyReLU 0.2)
///   GIN:                  eps, W1, b1, W2, b2
///   GraphSage/GraphConv:  W_self, W_neigh, b
///   AttentionPool:        gate (d x 1)
/// Mean/Max/Sum pooling and all merges carry no weights here.
struct OpWeights {
  OpId id = OpId::kMlp;
  std::vector<NamedTensor> tensors;

  const Tensor& at(std::size_t i) const { return tensors.at(i).value; }
  std::size_t parameter_count() const;
};

/// Glorot-uniform projections, zero biases, GIN eps = 0.
OpWeights init_op_weights(OpId id, std::size_t in_dim, std::size_t out_dim, Rng& rng);

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

inline constexpr double kGatSlope = 0.2;

/// Node aggregation. `views` supplies the raw adjacency and its normalized
/// variants (see AdjacencyViews).
Tensor apply_agg(OpId id, const Tensor& h, const AdjacencyViews& views, const OpWeights& weights);

/// Graph pooling over node -> graph segments.
Tensor apply_pool(OpId id, const Tensor& h, const Segments& segments, const OpWeights& weights);

/// Layer merging. Max/Sum/Mean act elementwise; Concat returns the column
/// concatenation (N x L d), projected back to d by the caller when needed.
Tensor apply_merge(OpId id, const std::vector<Tensor>& layers);

}  // namespace dsgas
