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
#include <functional>
#include <string>
#include <vector>

#include "dsgas/gnn_ops.hpp"
#include "dsgas/graph.hpp"
#include "dsgas/tensor.hpp"

namespace dsgas {

enum class NormKind { kBatch, kLayer, kNone };

const char* to_string(NormKind kind);
NormKind norm_kind_from_string(const std::string& s);

struct SuperNetConfig {
  TaskKind task = TaskKind::kGraphLevel;
  std::size_t factors = 4;  // K
  std::size_t layers = 3;   // L
  std::size_t in_dim = 1;   // F
  std::size_t hidden = 32;  // d
  NormKind norm = NormKind::kBatch;
  /// Std of the Gaussian noise on the initial operation logits. Zero makes all
  /// factors start identical, which the search objective cannot separate.
  double theta_init_std = 1e-3;

  void validate() const;
};

/// One searchable position of the DAG.
struct SlotInfo {
  std::string name;  // "agg0", "pool2", "merge", ...
  OpCategory category = OpCategory::kAgg;
  std::size_t layer = 0;
  std::vector<OpId> candidates;
};

enum class ParamGroup { kWeight, kArch, kPrototype, kEncoder };

/// K-factor super-network. Every factor path shares the same operation
/// weights; factors differ only through their rows of the logits theta.
///
/// Copies are shallow (tensors are handles), which is what augmented
/// forwards rely on: a copy can have its weights replaced without touching
/// the original.
struct SuperNet {
  SuperNetConfig config;
  std::vector<SlotInfo> slots;
  std::vector<Tensor> theta;  // per slot, K x |candidates|

  std::vector<std::vector<OpWeights>> agg;   // [layer][candidate]
  std::vector<Tensor> norm_gamma, norm_beta;  // per layer, 1 x d
  std::vector<std::vector<OpWeights>> pool;  // [layer][candidate], graph-level only
  Tensor merge_proj;                         // L d x d for ConcatMerge, graph-level with L > 1

  Tensor prototypes;  // K x 2d, factor prototypes c
  Tensor encoder;     // S x d, S = total candidates over all slots

  static SuperNet create(const SuperNetConfig& config, std::uint64_t seed);

  std::size_t factors() const { return config.factors; }
  std::size_t encoding_width() const;

  using Visitor = std::function<void(ParamGroup, const std::string&, Tensor&)>;
  using ConstVisitor = std::function<void(ParamGroup, const std::string&, const Tensor&)>;
  /// Visits every learnable tensor in a fixed order with a stable name.
  void visit(const Visitor& fn);
  void visit(const ConstVisitor& fn) const;

  std::vector<Tensor> parameters(ParamGroup group) const;
  std::size_t parameter_count(ParamGroup group) const;
};

/// Discretized architecture: per slot, per factor, the chosen candidate.
struct Architecture {
  std::vector<SlotInfo> slots;
  std::vector<std::vector<std::size_t>> choice;  // [slot][k] -> candidate index

  std::size_t factors() const { return choice.empty() ? 0 : choice.front().size(); }
  OpId op(std::size_t slot, std::size_t k) const { return slots[slot].candidates[choice[slot][k]]; }
};

struct ForwardOptions {
  /// Softmax temperature for every mixed operation.
  double temperature = 1.0;
  /// Fraction of mixed-op output entries zeroed (no rescale).
  double embed_dropout = 0.0;
  std::uint64_t dropout_seed = 0;
  /// When set, alphas are the one-hot choices of this architecture.
  const Architecture* architecture = nullptr;
};

struct ForwardResult {
  std::vector<Tensor> factors;  // K tensors, N x d (graphs or nodes)
  Tensor z;                     // N x K d
  std::vector<Tensor> alphas;   // per slot, K x |candidates|
};

/// alpha = softmax(theta / tau) per row.
Tensor mixed_alpha(const Tensor& theta, double temperature = 1.0);

/// Output of candidate `index` of `slot`. Agg and Pool take one input, Merge
/// takes the L per-layer pooled outputs. Merge candidates all emit N x d.
Tensor candidate_forward(const SuperNet& net, std::size_t slot, std::size_t index, const std::vector<Tensor>& inputs,
                         const GraphBatch& batch);

/// sum_i alpha[k, i] * candidate_i(inputs).
Tensor mixed_op_forward(const SuperNet& net, std::size_t slot, const Tensor& alpha, std::size_t k,
                        const std::vector<Tensor>& inputs, const GraphBatch& batch);

ForwardResult supernet_forward(const SuperNet& net, const GraphBatch& batch, const ForwardOptions& options = {});

/// Per-factor flattening of alpha across slots times the encoder map: K x d.
Tensor encode_arch(const std::vector<Tensor>& alphas, const Tensor& encoder);

/// Per slot, per factor argmax of theta; ties go to the lowest index.
Architecture discretize(const SuperNet& net);

/// Mean pairwise cosine similarity between the factors' flattened alphas.
double mean_alpha_cosine(const SuperNet& net);

}  // namespace dsgas
