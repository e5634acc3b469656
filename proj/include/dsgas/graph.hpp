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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsgas/tensor.hpp"

namespace dsgas {

enum class TaskKind { kGraphLevel, kNodeLevel };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

/// An attributed undirected graph. `adj` holds both directions of each edge.
struct Graph {
  Tensor features;  // n x F
  SparseAdj adj;
  std::optional<int> label;
  std::vector<int> node_labels;  // node-level datasets only

  std::size_t num_nodes() const { return features.rows(); }
  std::size_t num_undirected_edges() const { return adj.num_edges() / 2; }
};

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  TaskKind task = TaskKind::kGraphLevel;
  /// Edge lines as found in the source files and unique unordered pairs after
  /// symmetrization; both are reported since benchmark tables disagree on
  /// which one they count.
  std::size_t directed_edges = 0;
  std::size_t undirected_edges = 0;
  /// Per-graph generating variants (one entry per factor); synthetic data only.
  std::vector<std::vector<int>> factor_variants;

  /// Graph labels for graph-level data, node labels for node-level data.
  std::vector<int> labels() const;
};

/// Propagation operators derived from one adjacency, built once per batch.
struct AdjacencyViews {
  SparseAdj raw;    // A
  SparseAdj gcn;    // D~^-1/2 (A + I) D~^-1/2
  SparseAdj mean;   // row-normalized A, self-loop for isolated nodes
  SparseAdj loops;  // A + I, unweighted (attention support)
};

AdjacencyViews make_adjacency_views(const SparseAdj& adj);

/// Several graphs packed into one block-diagonal graph.
struct GraphBatch {
  Tensor features;  // sum(n) x F
  SparseAdj adj;
  Segments segments;  // node -> graph
  std::size_t num_graphs = 0;
  std::vector<std::size_t> node_offsets;  // size num_graphs + 1
  AdjacencyViews views;

  std::size_t num_nodes() const { return features.rows(); }
};

struct TuDatasetOptions {
  /// One-hot node degree instead of a constant-1 feature when the dataset
  /// ships neither node labels nor attributes.
  bool degree_features = false;
};

/// Reads the TUDataset text layout: {name}_A.txt, {name}_graph_indicator.txt
/// and {name}_graph_labels.txt are required, {name}_node_labels.txt and
/// {name}_node_attributes.txt optional. Node ids are 1-based. Throws
/// std::runtime_error naming the offending file (and line, where relevant).
GraphDataset parse_tudataset(const std::filesystem::path& directory, const std::string& name,
                             const TuDatasetOptions& options = {});

/// Generic node-classification text format: "src dst" (0-based) per edge
/// line, F whitespace-separated floats per feature row, one integer per
/// label row.
GraphDataset parse_node_dataset(const std::filesystem::path& edge_file, const std::filesystem::path& feature_file,
                                const std::filesystem::path& label_file);

enum class FactorKind {
  kStructure,  // variant 0: dense community, variant 1: star around a hub
  kFeature,    // variant 0: level signal on every node, variant 1: one outlier node
};

const char* to_string(FactorKind kind);
FactorKind factor_kind_from_string(const std::string& s);

struct FactorSpec {
  FactorKind kind = FactorKind::kStructure;
  std::size_t min_nodes = 6;
  std::size_t max_nodes = 10;
  double community_density = 0.7;  // structure factors
  double signal_level = 1.0;       // feature factors
  double signal_noise = 0.1;       // std of additive noise on the factor's channel
};

struct SyntheticSpec {
  std::size_t num_graphs = 400;
  std::vector<FactorSpec> factors;
  double bridge_prob = 0.05;
  std::size_t noise_features = 2;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  /// Two factors: one structural, one feature-driven.
  static SyntheticSpec planted_default();
};

/// Planted-factor graph classification data. Each graph is the disjoint union
/// of one motif per factor joined by sparse random bridges; its label is the
/// mixed-radix combination of the per-factor variants (2 variants each).
/// Features: a constant channel, one signal channel per factor and
/// `noise_features` Gaussian channels.
GraphDataset make_synthetic_factors(const SyntheticSpec& spec);

/// Writes a dataset in the TUDataset layout (graph-level only).
void write_tudataset(const GraphDataset& dataset, const std::filesystem::path& directory, const std::string& name);

GraphBatch batch_graphs(const std::vector<const Graph*>& graphs);
GraphBatch batch_graphs(const std::vector<Graph>& graphs);
GraphBatch batch_graphs(const GraphDataset& dataset, const std::vector<std::size_t>& indices);

/// Builds a Graph from an undirected edge list; edges are symmetrized,
/// deduplicated and self-loops dropped.
Graph make_graph(Tensor features, const std::vector<std::pair<std::size_t, std::size_t>>& undirected_edges,
                 std::optional<int> label = std::nullopt);

}  // namespace dsgas
