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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dsgas/graph.hpp"

namespace dsgas {

namespace fs = std::filesystem;

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

// Comma- or whitespace-separated tokens per non-empty line.
std::vector<Line> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<Line> out;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    std::replace(raw.begin(), raw.end(), ',', ' ');
    std::istringstream ss(raw);
    Line line{number, {}};
    for (std::string tok; ss >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void fail_at(const fs::path& file, std::size_t line, const std::string& what) {
  throw std::runtime_error(file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

long long parse_int(const fs::path& file, const Line& line, std::size_t i) {
  if (i >= line.tokens.size()) fail_at(file, line.number, "missing field");
  try {
    std::size_t used = 0;
    const long long v = std::stoll(line.tokens[i], &used);
    if (used != line.tokens[i].size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail_at(file, line.number, "not an integer: '" + line.tokens[i] + "'");
  }
}

double parse_double(const fs::path& file, const Line& line, std::size_t i) {
  try {
    return std::stod(line.tokens[i]);
  } catch (const std::exception&) {
    fail_at(file, line.number, "not a number: '" + line.tokens[i] + "'");
  }
}

// Dense relabeling of arbitrary integer labels to 0..C-1 in sorted order.
std::map<long long, int> dense_ids(const std::vector<long long>& raw) {
  std::map<long long, int> ids;
  for (long long v : raw) ids.emplace(v, 0);
  int next = 0;
  for (auto& [v, id] : ids) id = next++;
  return ids;
}

SparseAdj symmetric_adj(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& undirected) {
  std::vector<std::pair<std::size_t, std::size_t>> both;
  both.reserve(undirected.size() * 2);
  for (auto [a, b] : undirected) {
    if (a == b) continue;
    both.emplace_back(a, b);
    both.emplace_back(b, a);
  }
  return SparseAdj(n, both);
}

}  // namespace

const char* to_string(TaskKind kind) { return kind == TaskKind::kGraphLevel ? "graph" : "node"; }

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "graph") return TaskKind::kGraphLevel;
  if (s == "node") return TaskKind::kNodeLevel;
  throw std::invalid_argument("unknown task kind '" + s + "' (expected graph|node)");
}

std::vector<int> GraphDataset::labels() const {
  std::vector<int> out;
  if (task == TaskKind::kNodeLevel) {
    if (!graphs.empty()) out = graphs.front().node_labels;
    return out;
  }
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(g.label.value_or(-1));
  return out;
}

Graph make_graph(Tensor features, const std::vector<std::pair<std::size_t, std::size_t>>& undirected_edges,
                 std::optional<int> label) {
  if (features.rows() == 0) throw std::invalid_argument("make_graph: a graph needs at least one node");
  Graph g;
  g.adj = symmetric_adj(features.rows(), undirected_edges);
  g.features = std::move(features);
  g.label = label;
  return g;
}

GraphDataset parse_tudataset(const fs::path& directory, const std::string& name, const TuDatasetOptions& options) {
  auto file = [&](const char* suffix) { return directory / (name + suffix); };
  const fs::path a_file = file("_A.txt");
  const fs::path ind_file = file("_graph_indicator.txt");
  const fs::path glabel_file = file("_graph_labels.txt");
  for (const auto& f : {a_file, ind_file, glabel_file})
    if (!fs::exists(f)) throw std::runtime_error("missing required file " + f.string());

  const auto indicator = read_lines(ind_file);
  if (indicator.empty()) throw std::runtime_error(ind_file.string() + ": empty graph indicator");
  const auto glabels = read_lines(glabel_file);
  const std::size_t num_graphs = glabels.size();
  if (num_graphs == 0) throw std::runtime_error(glabel_file.string() + ": no graph labels");

  const std::size_t num_nodes = indicator.size();
  std::vector<std::size_t> graph_of(num_nodes);
  std::vector<std::size_t> local(num_nodes);
  std::vector<std::size_t> sizes(num_graphs, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const long long gid = parse_int(ind_file, indicator[v], 0);
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs)
      fail_at(ind_file, indicator[v].number, "graph id " + std::to_string(gid) + " outside 1.." + std::to_string(num_graphs));
    graph_of[v] = static_cast<std::size_t>(gid - 1);
    local[v] = sizes[graph_of[v]]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g)
    if (sizes[g] == 0) throw std::runtime_error(ind_file.string() + ": graph " + std::to_string(g + 1) + " has no nodes");

  GraphDataset ds;
  ds.name = name;
  ds.task = TaskKind::kGraphLevel;

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges(num_graphs);
  std::set<std::pair<std::size_t, std::size_t>> unordered;
  const auto a_lines = read_lines(a_file);
  for (const auto& line : a_lines) {
    const long long s = parse_int(a_file, line, 0);
    const long long d = parse_int(a_file, line, 1);
    for (long long v : {s, d})
      if (v < 1 || static_cast<std::size_t>(v) > num_nodes)
        fail_at(a_file, line.number, "dangling node index " + std::to_string(v) + " (have " + std::to_string(num_nodes) + " nodes)");
    const std::size_t su = static_cast<std::size_t>(s - 1), du = static_cast<std::size_t>(d - 1);
    if (graph_of[su] != graph_of[du]) fail_at(a_file, line.number, "edge crosses graphs");
    edges[graph_of[su]].emplace_back(local[su], local[du]);
    if (su != du) unordered.emplace(std::min(su, du), std::max(su, du));
  }
  ds.directed_edges = a_lines.size();
  ds.undirected_edges = unordered.size();

  // Node features: attributes, else one-hot node labels, else constant/degree.
  std::vector<std::vector<double>> feat(num_nodes);
  const fs::path attr_file = file("_node_attributes.txt");
  const fs::path nlabel_file = file("_node_labels.txt");
  if (fs::exists(attr_file)) {
    const auto rows = read_lines(attr_file);
    if (rows.size() != num_nodes)
      throw std::runtime_error(attr_file.string() + ": " + std::to_string(rows.size()) + " rows for " + std::to_string(num_nodes) + " nodes");
    for (std::size_t v = 0; v < num_nodes; ++v) {
      for (std::size_t j = 0; j < rows[v].tokens.size(); ++j) feat[v].push_back(parse_double(attr_file, rows[v], j));
      if (feat[v].size() != feat[0].size()) fail_at(attr_file, rows[v].number, "ragged attribute row");
    }
    ds.num_features = feat[0].size();
  } else if (fs::exists(nlabel_file)) {
    const auto rows = read_lines(nlabel_file);
    if (rows.size() != num_nodes)
      throw std::runtime_error(nlabel_file.string() + ": " + std::to_string(rows.size()) + " rows for " + std::to_string(num_nodes) + " nodes");
    std::vector<long long> raw(num_nodes);
    for (std::size_t v = 0; v < num_nodes; ++v) raw[v] = parse_int(nlabel_file, rows[v], 0);
    const auto ids = dense_ids(raw);
    ds.num_features = ids.size();
    for (std::size_t v = 0; v < num_nodes; ++v) {
      feat[v].assign(ds.num_features, 0.0);
      feat[v][static_cast<std::size_t>(ids.at(raw[v]))] = 1.0;
    }
  } else if (options.degree_features) {
    std::vector<std::size_t> degree(num_nodes, 0);
    for (auto [a, b] : unordered) {
      ++degree[a];
      ++degree[b];
    }
    const std::size_t max_degree = *std::max_element(degree.begin(), degree.end());
    ds.num_features = max_degree + 1;
    for (std::size_t v = 0; v < num_nodes; ++v) {
      feat[v].assign(ds.num_features, 0.0);
      feat[v][degree[v]] = 1.0;
    }
  } else {
    ds.num_features = 1;
    for (auto& row : feat) row.assign(1, 1.0);
  }

  std::vector<long long> raw_labels(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) raw_labels[g] = parse_int(glabel_file, glabels[g], 0);
  const auto label_ids = dense_ids(raw_labels);
  ds.num_classes = label_ids.size();

  std::vector<std::vector<double>> graph_feat(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) graph_feat[g].reserve(sizes[g] * ds.num_features);
  for (std::size_t v = 0; v < num_nodes; ++v)
    graph_feat[graph_of[v]].insert(graph_feat[graph_of[v]].end(), feat[v].begin(), feat[v].end());

  ds.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    Tensor x = Tensor::from(sizes[g], ds.num_features, std::move(graph_feat[g]));
    ds.graphs.push_back(make_graph(std::move(x), edges[g], label_ids.at(raw_labels[g])));
  }
  return ds;
}

GraphDataset parse_node_dataset(const fs::path& edge_file, const fs::path& feature_file, const fs::path& label_file) {
  for (const auto& f : {edge_file, feature_file, label_file})
    if (!fs::exists(f)) throw std::runtime_error("missing required file " + f.string());
  const auto feature_rows = read_lines(feature_file);
  const auto label_rows = read_lines(label_file);
  if (feature_rows.empty()) throw std::runtime_error(feature_file.string() + ": no feature rows");
  if (feature_rows.size() != label_rows.size())
    throw std::runtime_error("row-count mismatch: " + std::to_string(feature_rows.size()) + " feature rows vs " +
                             std::to_string(label_rows.size()) + " label rows");
  const std::size_t n = feature_rows.size();
  const std::size_t F = feature_rows.front().tokens.size();
  std::vector<double> x;
  x.reserve(n * F);
  for (const auto& row : feature_rows) {
    if (row.tokens.size() != F) fail_at(feature_file, row.number, "expected " + std::to_string(F) + " features");
    for (std::size_t j = 0; j < F; ++j) x.push_back(parse_double(feature_file, row, j));
  }
  std::vector<int> labels(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const long long l = parse_int(label_file, label_rows[i], 0);
    if (l < 0) fail_at(label_file, label_rows[i].number, "negative class id");
    labels[i] = static_cast<int>(l);
    max_label = std::max(max_label, labels[i]);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t directed = 0;
  std::set<std::pair<std::size_t, std::size_t>> unordered;
  for (const auto& line : read_lines(edge_file)) {
    const long long s = parse_int(edge_file, line, 0);
    const long long d = parse_int(edge_file, line, 1);
    for (long long v : {s, d})
      if (v < 0 || static_cast<std::size_t>(v) >= n)
        fail_at(edge_file, line.number, "node index " + std::to_string(v) + " outside 0.." + std::to_string(n - 1));
    edges.emplace_back(static_cast<std::size_t>(s), static_cast<std::size_t>(d));
    if (s != d) unordered.emplace(std::min(s, d), std::max(s, d));
    ++directed;
  }
  GraphDataset ds;
  ds.name = feature_file.stem().string();
  ds.task = TaskKind::kNodeLevel;
  ds.num_features = F;
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  ds.directed_edges = directed;
  ds.undirected_edges = unordered.size();
  Graph g = make_graph(Tensor::from(n, F, std::move(x)), edges);
  g.node_labels = std::move(labels);
  ds.graphs.push_back(std::move(g));
  return ds;
}

void write_tudataset(const GraphDataset& dataset, const fs::path& directory, const std::string& name) {
  if (dataset.task != TaskKind::kGraphLevel) throw std::invalid_argument("write_tudataset: graph-level data only");
  fs::create_directories(directory);
  auto open = [&](const char* suffix) {
    std::ofstream out(directory / (name + suffix));
    if (!out) throw std::runtime_error("cannot write " + (directory / (name + suffix)).string());
    out.precision(17);
    return out;
  };
  std::ofstream a = open("_A.txt");
  std::ofstream ind = open("_graph_indicator.txt");
  std::ofstream lab = open("_graph_labels.txt");
  std::ofstream attr = open("_node_attributes.txt");
  std::size_t offset = 1;
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const Graph& graph = dataset.graphs[g];
    for (auto [s, d] : graph.adj.edge_list()) a << s + offset << ", " << d + offset << '\n';
    for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
      ind << g + 1 << '\n';
      for (std::size_t j = 0; j < graph.features.cols(); ++j) attr << (j ? ", " : "") << graph.features(v, j);
      attr << '\n';
    }
    lab << graph.label.value_or(0) << '\n';
    offset += graph.num_nodes();
  }
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

AdjacencyViews make_adjacency_views(const SparseAdj& adj) {
  const std::size_t n = adj.num_nodes();
  AdjacencyViews v;
  v.raw = adj;
  std::vector<double> degree(n, 0.0);
  for (std::size_t d : adj.dst()) degree[d] += 1.0;

  auto edges = adj.edge_list();
  std::vector<std::pair<std::size_t, std::size_t>> with_loops = edges;
  for (std::size_t i = 0; i < n; ++i) with_loops.emplace_back(i, i);
  v.loops = SparseAdj(n, with_loops);

  std::vector<double> gcn_w;
  gcn_w.reserve(with_loops.size());
  for (auto [s, d] : with_loops) gcn_w.push_back(1.0 / std::sqrt((degree[s] + 1.0) * (degree[d] + 1.0)));
  v.gcn = SparseAdj(n, with_loops, gcn_w);

  std::vector<std::pair<std::size_t, std::size_t>> mean_edges = edges;
  std::vector<double> mean_w;
  mean_w.reserve(edges.size());
  for (auto [s, d] : edges) mean_w.push_back(1.0 / degree[d]);
  for (std::size_t i = 0; i < n; ++i)
    if (degree[i] == 0.0) {
      mean_edges.emplace_back(i, i);
      mean_w.push_back(1.0);
    }
  v.mean = SparseAdj(n, mean_edges, mean_w);
  return v;
}

GraphBatch batch_graphs(const std::vector<const Graph*>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("batch_graphs: empty graph list");
  const std::size_t F = graphs.front()->features.cols();
  std::size_t total = 0;
  for (const Graph* g : graphs) {
    if (g->features.cols() != F)
      throw std::invalid_argument("batch_graphs: feature width " + std::to_string(g->features.cols()) + " != " +
                                  std::to_string(F));
    total += g->num_nodes();
  }
  GraphBatch b;
  b.num_graphs = graphs.size();
  b.segments.count = graphs.size();
  b.segments.ids.reserve(total);
  b.node_offsets.reserve(graphs.size() + 1);
  std::vector<double> x;
  x.reserve(total * F);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = *graphs[gi];
    b.node_offsets.push_back(offset);
    x.insert(x.end(), g.features.values().begin(), g.features.values().end());
    for (std::size_t v = 0; v < g.num_nodes(); ++v) b.segments.ids.push_back(gi);
    const auto& src = g.adj.src();
    const auto& dst = g.adj.dst();
    for (std::size_t e = 0; e < src.size(); ++e) edges.emplace_back(src[e] + offset, dst[e] + offset);
    offset += g.num_nodes();
  }
  b.node_offsets.push_back(offset);
  b.features = Tensor::from(total, F, std::move(x));
  b.adj = SparseAdj(total, edges);
  b.views = make_adjacency_views(b.adj);
  return b;
}

GraphBatch batch_graphs(const std::vector<Graph>& graphs) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return batch_graphs(ptrs);
}

GraphBatch batch_graphs(const GraphDataset& dataset, const std::vector<std::size_t>& indices) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(indices.size());
  for (std::size_t i : indices) ptrs.push_back(&dataset.graphs.at(i));
  return batch_graphs(ptrs);
}

}  // namespace dsgas
