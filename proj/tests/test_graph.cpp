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

#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "dsgas/gnn_ops.hpp"
#include "dsgas/graph.hpp"
#include "test_util.hpp"

using namespace dsgas;
using dsgas::testing::max_abs_diff;
using dsgas::testing::random_graph;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dsgas_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void write(const std::string& file, const std::string& text) const { std::ofstream(path / file) << text; }
};

// Triangle (nodes 1-3) and a single edge (nodes 4-5), both directions listed.
void write_fixture(const TempDir& d) {
  d.write("FX_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n");
  d.write("FX_graph_indicator.txt", "1\n1\n1\n2\n2\n");
  d.write("FX_graph_labels.txt", "1\n-1\n");
  d.write("FX_node_labels.txt", "0\n1\n2\n0\n0\n");
}

bool is_star_motif(const Graph& g) {
  // structure-motif nodes carry the structure signal channel (index 1)
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    if (g.features(i, 1) > 0.5) nodes.push_back(i);
  std::map<std::size_t, std::size_t> degree;
  std::size_t intra = 0;
  for (auto [s, d] : g.adj.edge_list()) {
    const bool in_s = std::find(nodes.begin(), nodes.end(), s) != nodes.end();
    const bool in_d = std::find(nodes.begin(), nodes.end(), d) != nodes.end();
    if (in_s && in_d) {
      ++degree[d];
      ++intra;
    }
  }
  intra /= 2;
  std::size_t max_deg = 0;
  for (auto [n, k] : degree) max_deg = std::max(max_deg, k);
  return intra == nodes.size() - 1 && max_deg == nodes.size() - 1;
}

bool has_outlier(const Graph& g) {
  double best = 0.0;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) best = std::max(best, g.features(i, 2));
  return best > 2.0;
}

}  // namespace

TEST_CASE("parse_tudataset: hand-written two-graph fixture") {
  TempDir d("tu");
  write_fixture(d);
  GraphDataset ds = parse_tudataset(d.path, "FX");
  REQUIRE(ds.graphs.size() == 2);
  CHECK(ds.num_features == 3);  // one-hot over node labels {0,1,2}
  CHECK(ds.num_classes == 2);
  CHECK(ds.graphs[0].num_nodes() == 3);
  CHECK(ds.graphs[0].num_undirected_edges() == 3);
  CHECK(ds.graphs[1].num_nodes() == 2);
  CHECK(ds.graphs[1].num_undirected_edges() == 1);
  CHECK(ds.directed_edges == 8);
  CHECK(ds.undirected_edges == 4);
  CHECK(ds.graphs[0].features(1, 1) == 1.0);
  CHECK(ds.graphs[0].label != ds.graphs[1].label);

  GraphDataset again = parse_tudataset(d.path, "FX");
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(max_abs_diff(again.graphs[i].features.values(), ds.graphs[i].features.values()) == 0.0);
    CHECK(again.graphs[i].adj.edge_list() == ds.graphs[i].adj.edge_list());
  }
}

TEST_CASE("parse_tudataset: errors name the file and line") {
  TempDir d("tuerr");
  write_fixture(d);
  fs::remove(d.path / "FX_graph_labels.txt");
  try {
    parse_tudataset(d.path, "FX");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("FX_graph_labels.txt") != std::string::npos);
  }
  write_fixture(d);
  d.write("FX_A.txt", "1, 2\n2, 9\n");
  try {
    parse_tudataset(d.path, "FX");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_fixture(d);
  d.write("FX_graph_indicator.txt", "");
  CHECK_THROWS_AS(parse_tudataset(d.path, "FX"), std::runtime_error);
}

TEST_CASE("parse_tudataset: featureless graphs get a constant or degree feature") {
  TempDir d("tuplain");
  write_fixture(d);
  fs::remove(d.path / "FX_node_labels.txt");
  GraphDataset plain = parse_tudataset(d.path, "FX");
  CHECK(plain.num_features == 1);
  for (const auto& g : plain.graphs)
    for (double v : g.features.values()) CHECK(v == 1.0);
  GraphDataset deg = parse_tudataset(d.path, "FX", TuDatasetOptions{true});
  CHECK(deg.num_features == 3);  // degrees 0..2
  CHECK(deg.graphs[0].features(0, 2) == 1.0);
  CHECK(deg.graphs[1].features(0, 1) == 1.0);
}

TEST_CASE("write_tudataset round-trips through the parser") {
  TempDir d("tuwrite");
  SyntheticSpec spec = SyntheticSpec::planted_default();
  spec.num_graphs = 12;
  GraphDataset ds = make_synthetic_factors(spec);
  write_tudataset(ds, d.path, "SYN");
  GraphDataset back = parse_tudataset(d.path, "SYN");
  REQUIRE(back.graphs.size() == ds.graphs.size());
  CHECK(back.num_features == ds.num_features);
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    CHECK(back.graphs[i].adj.edge_list() == ds.graphs[i].adj.edge_list());
    CHECK(max_abs_diff(back.graphs[i].features.values(), ds.graphs[i].features.values()) < 1e-12);
  }
}

TEST_CASE("parse_node_dataset: path fixture and row mismatch") {
  TempDir d("node");
  d.write("e.txt", "0 1\n1 2\n");
  d.write("x.txt", "1 0\n0 1\n1 1\n");
  d.write("y.txt", "0\n1\n0\n");
  GraphDataset ds = parse_node_dataset(d.path / "e.txt", d.path / "x.txt", d.path / "y.txt");
  CHECK(ds.task == TaskKind::kNodeLevel);
  REQUIRE(ds.graphs.size() == 1);
  CHECK(ds.graphs[0].num_nodes() == 3);
  CHECK(ds.num_classes == 2);
  d.write("x.txt", "1 0\n0 1\n1 1\n2 2\n");
  CHECK_THROWS(parse_node_dataset(d.path / "e.txt", d.path / "x.txt", d.path / "y.txt"));
}

TEST_CASE("synthetic factors: label arithmetic, determinism, balance") {
  SyntheticSpec spec = SyntheticSpec::planted_default();
  spec.seed = 7;
  GraphDataset a = make_synthetic_factors(spec);
  CHECK(a.num_classes == 4);
  CHECK(a.graphs.size() == 400);
  std::map<int, int> counts;
  for (int y : a.labels()) ++counts[y];
  for (auto [y, c] : counts) CHECK(std::abs(c - 100) <= 1);

  GraphDataset b = make_synthetic_factors(spec);
  for (std::size_t i = 0; i < a.graphs.size(); ++i) {
    CHECK(a.graphs[i].adj.edge_list() == b.graphs[i].adj.edge_list());
    CHECK(max_abs_diff(a.graphs[i].features.values(), b.graphs[i].features.values()) == 0.0);
  }

  SyntheticSpec bad = spec;
  bad.factors.resize(1);
  CHECK_THROWS_AS(make_synthetic_factors(bad), std::invalid_argument);
}

TEST_CASE("synthetic factors: rule classifiers recover their own factor only") {
  SyntheticSpec spec = SyntheticSpec::planted_default();
  spec.seed = 11;
  GraphDataset ds = make_synthetic_factors(spec);
  std::size_t own_s = 0, own_f = 0, cross_s = 0, cross_f = 0;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const int star = is_star_motif(ds.graphs[i]) ? 1 : 0;
    const int outlier = has_outlier(ds.graphs[i]) ? 1 : 0;
    own_s += star == ds.factor_variants[i][0];
    own_f += outlier == ds.factor_variants[i][1];
    cross_s += star == ds.factor_variants[i][1];
    cross_f += outlier == ds.factor_variants[i][0];
  }
  const double n = static_cast<double>(ds.graphs.size());
  CHECK(own_s == ds.graphs.size());
  CHECK(own_f == ds.graphs.size());
  CHECK(std::abs(cross_s / n - 0.5) < 0.1);
  CHECK(std::abs(cross_f / n - 0.5) < 0.1);
}

TEST_CASE("batch_graphs: segments, errors, and per-graph message passing") {
  Rng rng(21);
  std::vector<Graph> gs{random_graph(3, 3, 2, rng), random_graph(2, 1, 2, rng)};
  GraphBatch b = batch_graphs(gs);
  CHECK(b.segments.ids == std::vector<std::size_t>{0, 0, 0, 1, 1});
  CHECK(b.num_graphs == 2);
  CHECK(b.node_offsets == std::vector<std::size_t>{0, 3, 5});

  GraphBatch one = batch_graphs(std::vector<Graph>{gs[0]});
  CHECK(one.adj.edge_list() == gs[0].adj.edge_list());
  CHECK(one.segments.ids == std::vector<std::size_t>(3, 0));

  std::vector<Graph> mixed{random_graph(3, 2, 2, rng), random_graph(3, 2, 3, rng)};
  CHECK_THROWS_AS(batch_graphs(mixed), std::invalid_argument);

  // batched aggregation restricted to a segment equals the per-graph result
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r(300 + seed);
    std::vector<Graph> many;
    for (int i = 0; i < 4; ++i) many.push_back(random_graph(2 + uniform_index(r, 6), 8, 3, r));
    GraphBatch batch = batch_graphs(many);
    for (OpId id : agg_candidates()) {
      OpWeights w = init_op_weights(id, 3, 4, r);
      Tensor all = apply_agg(id, batch.features, batch.views, w);
      for (std::size_t g = 0; g < many.size(); ++g) {
        Tensor part = apply_agg(id, many[g].features, make_adjacency_views(many[g].adj), w);
        double err = 0.0;
        for (std::size_t i = 0; i < part.rows(); ++i)
          for (std::size_t c = 0; c < 4; ++c)
            err = std::max(err, std::abs(part(i, c) - all(batch.node_offsets[g] + i, c)));
        INFO(op_name(id));
        CHECK(err < 1e-10);
      }
    }
  }
}
