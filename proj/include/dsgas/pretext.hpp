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
#include <string>
#include <utility>
#include <vector>

#include "dsgas/graph.hpp"
#include "dsgas/random.hpp"
#include "dsgas/tensor.hpp"

namespace dsgas {

enum class ViewAugKind { kNodeDrop, kEdgePerturb, kFeatureMask };

const char* to_string(ViewAugKind kind);
ViewAugKind view_aug_from_string(const std::string& s);

struct ViewAugSpec {
  ViewAugKind kind = ViewAugKind::kNodeDrop;
  double ratio = 0.2;

  void validate() const;
};

enum class PretextKind { kGraphContrastive, kNodeContrastive };

const char* to_string(PretextKind kind);
PretextKind pretext_kind_from_string(const std::string& s);

struct PretextConfig {
  PretextKind kind = PretextKind::kGraphContrastive;
  ViewAugSpec view1{ViewAugKind::kNodeDrop, 0.2};
  ViewAugSpec view2{ViewAugKind::kEdgePerturb, 0.2};
  double temperature = 0.5;  // NT-Xent t
  /// Node task: nodes sampled per step as contrastive instances.
  std::size_t node_samples = 256;

  /// Defaults for a task: node_drop + edge_perturb for graphs,
  /// edge_perturb + feature_mask for nodes.
  static PretextConfig defaults_for(TaskKind task);
  void validate() const;
};

/// One augmented copy of `g`.
///   node_drop:    removes ceil(ratio n) nodes and their edges, keeping >= 1
///   edge_perturb: removes ceil(ratio |E|) edges and adds as many non-edges
///   feature_mask: zeroes ceil(ratio F) feature columns
Graph augment_view(const Graph& g, const ViewAugSpec& spec, Rng& rng);

/// Two independent views of `g`, deterministic given `seed`.
std::pair<Graph, Graph> make_views(const Graph& g, const ViewAugSpec& spec1, const ViewAugSpec& spec2,
                                   std::uint64_t seed);

/// Views of every graph in a batch, packed as two batches in the same order.
std::pair<GraphBatch, GraphBatch> make_view_batches(const std::vector<const Graph*>& graphs,
                                                    const ViewAugSpec& spec1, const ViewAugSpec& spec2,
                                                    std::uint64_t seed);

/// Two-layer projection head d -> d -> d with a ReLU in between.
struct ProjectionHead {
  Tensor w1, b1, w2, b2;

  static ProjectionHead create(std::size_t dim, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

/// Added to squared norms inside the cosine. A ReLU head can emit an exact
/// zero vector, where a plain cosine has no derivative.
inline constexpr double kCosineEps = 1e-5;

/// Per-instance NT-Xent with in-batch negatives, N x 1:
///   l_i = -log exp(cos(a_i, b_i) / t) / sum_{j != i} exp(cos(a_i, b_j) / t)
/// with cos(u, v) = u.v / sqrt((|u|^2 + kCosineEps)(|v|^2 + kCosineEps)).
/// Throws for fewer than two instances.
Tensor nt_xent(const Tensor& a, const Tensor& b, double temperature);

/// Per-factor pretext losses, N x K. `view1[k]`, `view2[k]` are factor k's
/// embeddings of the two views; each goes through the shared head.
Tensor per_factor_losses(const std::vector<Tensor>& view1, const std::vector<Tensor>& view2,
                         const ProjectionHead& head, double temperature);

/// Node task: `count` distinct node indices (all nodes when n <= count),
/// sorted ascending.
std::vector<std::size_t> sample_nodes(std::size_t n, std::size_t count, Rng& rng);

}  // namespace dsgas
