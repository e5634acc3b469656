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

#include "dsgas/pretext.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dsgas/gnn_ops.hpp"

namespace dsgas {

const char* to_string(ViewAugKind kind) {
  switch (kind) {
    case ViewAugKind::kNodeDrop:
      return "node_drop";
    case ViewAugKind::kEdgePerturb:
      return "edge_perturb";
    case ViewAugKind::kFeatureMask:
      return "feature_mask";
  }
  return "?";
}

ViewAugKind view_aug_from_string(const std::string& s) {
  if (s == "node_drop") return ViewAugKind::kNodeDrop;
  if (s == "edge_perturb") return ViewAugKind::kEdgePerturb;
  if (s == "feature_mask") return ViewAugKind::kFeatureMask;
  throw std::invalid_argument("unknown view augmentation '" + s + "' (expected node_drop|edge_perturb|feature_mask)");
}

void ViewAugSpec::validate() const {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("view augmentation ratio must be in [0, 1)");
}

const char* to_string(PretextKind kind) {
  return kind == PretextKind::kGraphContrastive ? "graph_contrastive" : "node_contrastive";
}

PretextKind pretext_kind_from_string(const std::string& s) {
  if (s == "graph_contrastive") return PretextKind::kGraphContrastive;
  if (s == "node_contrastive") return PretextKind::kNodeContrastive;
  throw std::invalid_argument("unknown pretext task '" + s + "' (expected graph_contrastive|node_contrastive)");
}

PretextConfig PretextConfig::defaults_for(TaskKind task) {
  PretextConfig c;
  if (task == TaskKind::kNodeLevel) {
    c.kind = PretextKind::kNodeContrastive;
    c.view1 = {ViewAugKind::kEdgePerturb, 0.2};
    c.view2 = {ViewAugKind::kFeatureMask, 0.2};
  }
  return c;
}

void PretextConfig::validate() const {
  view1.validate();
  view2.validate();
  if (!(temperature > 0.0)) throw std::invalid_argument("pretext temperature must be > 0");
  if (kind == PretextKind::kNodeContrastive) {
    // node instances must stay aligned between the two views
    if ((view1.kind == ViewAugKind::kNodeDrop && view1.ratio > 0.0) ||
        (view2.kind == ViewAugKind::kNodeDrop && view2.ratio > 0.0))
      throw std::invalid_argument("node_contrastive views cannot drop nodes");
    if (node_samples < 2) throw std::invalid_argument("node_samples must be >= 2");
  }
}

namespace {

std::size_t ceil_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-12));
}

std::vector<std::pair<std::size_t, std::size_t>> undirected_edges(const Graph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto [s, d] : g.adj.edge_list())
    if (s < d) out.emplace_back(s, d);
  return out;
}

Graph with_structure(const Graph& g, Tensor features, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                     std::vector<int> node_labels) {
  Graph out = make_graph(std::move(features), edges, g.label);
  out.node_labels = std::move(node_labels);
  return out;
}

Graph node_drop(const Graph& g, double ratio, Rng& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t wanted = ceil_count(ratio, n);
  for (std::size_t attempt = 0; attempt < 3; ++attempt) {
    const std::size_t drop = wanted >= attempt ? wanted - attempt : 0;
    if (drop >= n) continue;  // would leave an empty graph
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    std::vector<bool> dropped(n, false);
    for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;

    std::vector<std::size_t> remap(n, n), kept;
    for (std::size_t i = 0; i < n; ++i)
      if (!dropped[i]) {
        remap[i] = kept.size();
        kept.push_back(i);
      }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (auto [s, d] : undirected_edges(g))
      if (!dropped[s] && !dropped[d]) edges.emplace_back(remap[s], remap[d]);
    std::vector<int> labels;
    if (!g.node_labels.empty())
      for (std::size_t i : kept) labels.push_back(g.node_labels[i]);
    return with_structure(g, gather_rows(g.features.detach(), kept), edges, std::move(labels));
  }
  throw std::runtime_error("node_drop: graph would be reduced to 0 nodes after 3 attempts");
}

Graph edge_perturb(const Graph& g, double ratio, Rng& rng) {
  const std::size_t n = g.num_nodes();
  auto edges = undirected_edges(g);
  const std::size_t pairs = n * (n - 1) / 2;
  const std::size_t m = std::min(ceil_count(ratio, edges.size()), pairs - edges.size());
  if (m == 0) return g;

  std::set<std::pair<std::size_t, std::size_t>> existing(edges.begin(), edges.end());
  shuffle(edges, rng);
  edges.resize(edges.size() - m);
  std::set<std::pair<std::size_t, std::size_t>> added;
  while (added.size() < m) {
    std::size_t a = uniform_index(rng, n), b = uniform_index(rng, n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (existing.count({a, b}) || added.count({a, b})) continue;
    added.insert({a, b});
    edges.emplace_back(a, b);
  }
  return with_structure(g, g.features.detach(), edges, g.node_labels);
}

Graph feature_mask(const Graph& g, double ratio, Rng& rng) {
  const std::size_t F = g.features.cols();
  const std::size_t m = ceil_count(ratio, F);
  if (m == 0) return g;
  std::vector<std::size_t> cols(F);
  std::iota(cols.begin(), cols.end(), 0);
  shuffle(cols, rng);
  std::vector<double> x(g.features.values().begin(), g.features.values().end());
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < g.num_nodes(); ++r) x[r * F + cols[c]] = 0.0;
  Graph out = g;
  out.features = Tensor::from(g.num_nodes(), F, std::move(x));
  return out;
}

}  // namespace

Graph augment_view(const Graph& g, const ViewAugSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.ratio == 0.0) return g;
  switch (spec.kind) {
    case ViewAugKind::kNodeDrop:
      return node_drop(g, spec.ratio, rng);
    case ViewAugKind::kEdgePerturb:
      return edge_perturb(g, spec.ratio, rng);
    case ViewAugKind::kFeatureMask:
      return feature_mask(g, spec.ratio, rng);
  }
  throw std::logic_error("augment_view: bad kind");
}

std::pair<Graph, Graph> make_views(const Graph& g, const ViewAugSpec& spec1, const ViewAugSpec& spec2,
                                   std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kViews);
  Graph a = augment_view(g, spec1, rng);
  Graph b = augment_view(g, spec2, rng);
  return {std::move(a), std::move(b)};
}

std::pair<GraphBatch, GraphBatch> make_view_batches(const std::vector<const Graph*>& graphs,
                                                    const ViewAugSpec& spec1, const ViewAugSpec& spec2,
                                                    std::uint64_t seed) {
  std::vector<Graph> first, second;
  first.reserve(graphs.size());
  second.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    auto [a, b] = make_views(*graphs[i], spec1, spec2, derive_seed(seed, Stream::kViews, i));
    first.push_back(std::move(a));
    second.push_back(std::move(b));
  }
  return {batch_graphs(first), batch_graphs(second)};
}

ProjectionHead ProjectionHead::create(std::size_t dim, Rng& rng) {
  ProjectionHead h;
  h.w1 = glorot_uniform(dim, dim, rng);
  h.b1 = Tensor::zeros(1, dim, true);
  h.w2 = glorot_uniform(dim, dim, rng);
  h.b2 = Tensor::zeros(1, dim, true);
  return h;
}

Tensor ProjectionHead::forward(const Tensor& x) const {
  return add_row(matmul(relu(add_row(matmul(x, w1), b1)), w2), b2);
}

Tensor nt_xent(const Tensor& a, const Tensor& b, double temperature) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("nt_xent: view shapes differ");
  const std::size_t n = a.rows();
  if (n < 2) throw std::invalid_argument("nt_xent: need at least 2 instances per batch for in-batch negatives");
  if (!(temperature > 0.0)) throw std::invalid_argument("nt_xent: temperature must be > 0");
  const Tensor sim = scale(matmul_bt(l2_normalize_rows(a, kCosineEps), l2_normalize_rows(b, kCosineEps)), 1.0 / temperature);
  std::vector<std::uint8_t> off_diagonal(n * n, 1);
  for (std::size_t i = 0; i < n; ++i) off_diagonal[i * n + i] = 0;
  return sub(logsumexp_rows(sim, off_diagonal), diagonal(sim));
}

Tensor per_factor_losses(const std::vector<Tensor>& view1, const std::vector<Tensor>& view2,
                         const ProjectionHead& head, double temperature) {
  if (view1.size() != view2.size() || view1.empty())
    throw std::invalid_argument("per_factor_losses: need the same non-zero factor count for both views");
  std::vector<Tensor> cols;
  for (std::size_t k = 0; k < view1.size(); ++k)
    cols.push_back(nt_xent(head.forward(view1[k]), head.forward(view2[k]), temperature));
  return cols.size() == 1 ? cols.front() : concat_cols(cols);
}

std::vector<std::size_t> sample_nodes(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > count) {
    shuffle(idx, rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace dsgas
