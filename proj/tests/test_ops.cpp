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

#include <cmath>
#include <numeric>

#include "dsgas/gnn_ops.hpp"
#include "dsgas/gradcheck.hpp"
#include "test_util.hpp"

using namespace dsgas;
using dsgas::testing::max_abs_diff;
using dsgas::testing::random_graph;
using dsgas::testing::random_tensor;

namespace {

std::vector<Tensor> weight_list(const OpWeights& w) {
  std::vector<Tensor> out;
  for (const auto& t : w.tensors) out.push_back(t.value);
  return out;
}

// Relabels node i as perm[i].
Graph permute(const Graph& g, const std::vector<std::size_t>& perm) {
  const std::size_t n = g.num_nodes(), F = g.features.cols();
  std::vector<double> feats(n * F);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < F; ++c) feats[perm[i] * F + c] = g.features(i, c);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto [s, d] : g.adj.edge_list()) edges.emplace_back(perm[s], perm[d]);
  return make_graph(Tensor::from(n, F, feats), edges);
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  shuffle(p, rng);
  return p;
}

}  // namespace

TEST_CASE("op names round-trip and categories are consistent") {
  for (OpId id : agg_candidates()) CHECK(category_of(id) == OpCategory::kAgg);
  for (OpId id : pool_candidates()) CHECK(category_of(id) == OpCategory::kPool);
  for (OpId id : merge_candidates()) CHECK(category_of(id) == OpCategory::kMerge);
  for (int i = 0; i <= static_cast<int>(OpId::kMeanMerge); ++i) {
    const auto id = static_cast<OpId>(i);
    CHECK(op_from_name(op_name(id)) == id);
  }
  CHECK(op_name(OpId::kGraphSage) == "GraphSage");
  CHECK_THROWS_AS(op_from_name("SortPool"), std::invalid_argument);
}

TEST_CASE("MLP with identity weights leaves H unchanged and ignores edges") {
  Rng rng(3);
  Graph g = random_graph(6, 9, 4, rng);
  OpWeights w = init_op_weights(OpId::kMlp, 4, 4, rng);
  w.tensors[0].value = Tensor::identity(4);
  const auto views = make_adjacency_views(g.adj);
  Tensor y = apply_agg(OpId::kMlp, g.features, views, w);
  CHECK(max_abs_diff(y.values(), g.features.values()) == 0.0);

  const auto empty = make_adjacency_views(SparseAdj(6, {}));
  CHECK(max_abs_diff(apply_agg(OpId::kMlp, g.features, empty, w).values(), y.values()) == 0.0);
}

TEST_CASE("GraphConv with zero neighbour weight equals MLP") {
  Rng rng(4);
  Graph g = random_graph(7, 10, 3, rng);
  const auto views = make_adjacency_views(g.adj);
  OpWeights conv = init_op_weights(OpId::kGraphConv, 3, 5, rng);
  conv.tensors[1].value = Tensor::zeros(3, 5);
  OpWeights mlp = init_op_weights(OpId::kMlp, 3, 5, rng);
  mlp.tensors[0].value = conv.at(0);
  mlp.tensors[1].value = conv.at(2);
  CHECK(max_abs_diff(apply_agg(OpId::kGraphConv, g.features, views, conv).values(),
                     apply_agg(OpId::kMlp, g.features, views, mlp).values()) < 1e-15);
}

TEST_CASE("GCN on a 4-node path matches a scalar oracle") {
  // Path 0-1-2-3, one feature column, W = [[2]], b = 0.
  Graph g = make_graph(Tensor::from(4, 1, {1.0, 2.0, 3.0, 4.0}), {{0, 1}, {1, 2}, {2, 3}});
  Rng rng(5);
  OpWeights w = init_op_weights(OpId::kGcn, 1, 1, rng);
  w.tensors[0].value = Tensor::from(1, 1, {2.0});
  Tensor y = apply_agg(OpId::kGcn, g.features, make_adjacency_views(g.adj), w);

  // Degrees with self-loop: 2, 3, 3, 2.
  const double deg[4] = {2, 3, 3, 2};
  const double h[4] = {2, 4, 6, 8};  // H W
  const int nbrs[4][3] = {{0, 1, -1}, {0, 1, 2}, {1, 2, 3}, {2, 3, -1}};
  for (int i = 0; i < 4; ++i) {
    double expect = 0.0;
    for (int j : nbrs[i])
      if (j >= 0) expect += h[j] / std::sqrt(deg[i] * deg[j]);
    CHECK(y(i, 0) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("GCN is invariant to duplicate edge insertion") {
  Rng rng(6);
  Tensor x = random_tensor(4, 2, rng);
  Graph a = make_graph(x, {{0, 1}, {1, 2}, {2, 3}});
  Graph b = make_graph(x, {{0, 1}, {1, 0}, {1, 2}, {2, 3}, {2, 3}});
  OpWeights w = init_op_weights(OpId::kGcn, 2, 3, rng);
  CHECK(max_abs_diff(apply_agg(OpId::kGcn, x, make_adjacency_views(a.adj), w).values(),
                     apply_agg(OpId::kGcn, x, make_adjacency_views(b.adj), w).values()) == 0.0);
}

TEST_CASE("GAT and mean aggregation handle isolated nodes via self-loops") {
  Rng rng(7);
  Graph g = make_graph(random_tensor(3, 2, rng), {{0, 1}});  // node 2 isolated
  const auto views = make_adjacency_views(g.adj);
  for (OpId id : {OpId::kGat, OpId::kGraphSage}) {
    OpWeights w = init_op_weights(id, 2, 2, rng);
    Tensor y = apply_agg(id, g.features, views, w);
    for (double v : y.values()) CHECK(std::isfinite(v));
  }
  // A lone node under GAT attends only to itself: output = h W + b.
  OpWeights w = init_op_weights(OpId::kGat, 2, 2, rng);
  Tensor y = apply_agg(OpId::kGat, g.features, views, w);
  Tensor hw = matmul(g.features, w.at(0));
  CHECK(y(2, 0) == doctest::Approx(hw(2, 0)).epsilon(1e-14));
  CHECK(y(2, 1) == doctest::Approx(hw(2, 1)).epsilon(1e-14));
}

TEST_CASE("GAT attention matches an explicit neighbourhood softmax") {
  Rng rng(8);
  Graph g = random_graph(5, 7, 3, rng);
  OpWeights w = init_op_weights(OpId::kGat, 3, 2, rng);
  Tensor y = apply_agg(OpId::kGat, g.features, make_adjacency_views(g.adj), w);
  Tensor wh = matmul(g.features, w.at(0));
  const auto dense = g.adj.densify();
  auto score = [&](std::size_t r) { return wh(r, 0) * w.at(1)(0, 0) + wh(r, 1) * w.at(1)(1, 0); };
  auto score_dst = [&](std::size_t r) { return wh(r, 0) * w.at(2)(0, 0) + wh(r, 1) * w.at(2)(1, 0); };
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<std::size_t> nb{i};
    for (std::size_t j = 0; j < 5; ++j)
      if (dense[i * 5 + j] != 0.0) nb.push_back(j);
    std::vector<double> e;
    for (std::size_t j : nb) {
      const double s = score_dst(i) + score(j);
      e.push_back(s > 0 ? s : 0.2 * s);
    }
    const double m = *std::max_element(e.begin(), e.end());
    double z = 0.0;
    for (double& v : e) z += (v = std::exp(v - m));
    for (std::size_t c = 0; c < 2; ++c) {
      double expect = 0.0;
      for (std::size_t t = 0; t < nb.size(); ++t) expect += e[t] / z * wh(nb[t], c);
      CHECK(y(i, c) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregations are permutation equivariant, pools invariant") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    Graph g = random_graph(8, 12, 3, rng);
    const auto perm = random_perm(8, rng);
    Graph p = permute(g, perm);
    const auto gv = make_adjacency_views(g.adj), pv = make_adjacency_views(p.adj);
    for (OpId id : agg_candidates()) {
      OpWeights w = init_op_weights(id, 3, 4, rng);
      Tensor a = apply_agg(id, g.features, gv, w);
      Tensor b = apply_agg(id, p.features, pv, w);
      double err = 0.0;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t c = 0; c < 4; ++c) err = std::max(err, std::abs(a(i, c) - b(perm[i], c)));
      INFO(op_name(id));
      CHECK(err < 1e-9);
    }
    const Segments one{std::vector<std::size_t>(8, 0), 1};
    for (OpId id : pool_candidates()) {
      OpWeights w = init_op_weights(id, 3, 3, rng);
      INFO(op_name(id));
      CHECK(max_abs_diff(apply_pool(id, g.features, one, w).values(), apply_pool(id, p.features, one, w).values()) <
            1e-9);
    }
  }
}

TEST_CASE("pool trivial cases") {
  Rng rng(9);
  Tensor x = random_tensor(1, 4, rng);
  const Segments single{{0}, 1};
  for (OpId id : pool_candidates()) {
    OpWeights w = init_op_weights(id, 4, 4, rng);
    CHECK(max_abs_diff(apply_pool(id, x, single, w).values(), x.values()) < 1e-15);
  }
  Tensor twin = Tensor::from(2, 2, {1.5, -2.0, 1.5, -2.0});
  const Segments both{{0, 0}, 1};
  OpWeights none;
  CHECK(max_abs_diff(apply_pool(OpId::kMeanPool, twin, both, none).values(), std::vector<double>{1.5, -2.0}) == 0.0);

  Tensor h = random_tensor(6, 3, rng);
  const Segments segs{{0, 0, 1, 1, 1, 0}, 2};
  OpWeights att = init_op_weights(OpId::kAttentionPool, 3, 3, rng);
  att.tensors[0].value = Tensor::zeros(3, 1);
  CHECK(max_abs_diff(apply_pool(OpId::kAttentionPool, h, segs, att).values(),
                     apply_pool(OpId::kMeanPool, h, segs, none).values()) < 1e-15);
  CHECK_THROWS(apply_pool(OpId::kMeanPool, h, Segments{{0, 0, 0, 0, 0, 0}, 2}, none));
  CHECK_THROWS_AS(apply_pool(OpId::kGcn, h, segs, none), std::invalid_argument);
}

TEST_CASE("merge trivial cases and a naive per-element oracle") {
  Rng rng(10);
  Tensor x = random_tensor(3, 4, rng);
  for (OpId id : merge_candidates())
    CHECK(max_abs_diff(apply_merge(id, {x}).values(), x.values()) == 0.0);
  Tensor s = apply_merge(OpId::kSumMerge, {x, scale(x, -1.0)});
  for (double v : s.values()) CHECK(v == 0.0);

  std::vector<Tensor> layers{random_tensor(3, 4, rng), random_tensor(3, 4, rng), random_tensor(3, 4, rng)};
  Tensor mx = apply_merge(OpId::kMaxMerge, layers);
  Tensor sm = apply_merge(OpId::kSumMerge, layers);
  Tensor mn = apply_merge(OpId::kMeanMerge, layers);
  Tensor cc = apply_merge(OpId::kConcatMerge, layers);
  REQUIRE(cc.cols() == 12);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      double m = -INFINITY, t = 0.0;
      for (std::size_t l = 0; l < 3; ++l) {
        m = std::max(m, layers[l](i, c));
        t += layers[l](i, c);
        CHECK(cc(i, l * 4 + c) == layers[l](i, c));
      }
      CHECK(mx(i, c) == m);
      CHECK(sm(i, c) == doctest::Approx(t).epsilon(1e-15));
      CHECK(mn(i, c) == doctest::Approx(t / 3).epsilon(1e-15));
    }
  CHECK_THROWS_AS(apply_merge(OpId::kSumMerge, {x, random_tensor(3, 2, rng)}), std::invalid_argument);
  CHECK_THROWS_AS(apply_merge(OpId::kSumMerge, {}), std::invalid_argument);
}

TEST_CASE("every operation passes the finite-difference gradient check") {
  Rng rng(11);
  Graph g = random_graph(6, 8, 3, rng);
  const auto views = make_adjacency_views(g.adj);
  Tensor h = random_tensor(6, 3, rng, true);
  Tensor probe = random_tensor(6, 4, rng);
  for (OpId id : agg_candidates()) {
    OpWeights w = init_op_weights(id, 3, 4, rng);
    if (id == OpId::kGin) w.tensors[0].value.mutable_values()[0] = 0.3;
    auto params = weight_list(w);
    params.push_back(h);
    auto r = finite_diff_check([&] { return sum(mul(apply_agg(id, h, views, w), probe)); }, params);
    INFO(op_name(id), " worst ", r.worst_param, " a=", r.worst_analytic, " fd=", r.worst_numeric);
    CHECK(r.max_rel_error < 1e-4);
  }
  const Segments segs{{0, 0, 1, 1, 1, 0}, 2};
  Tensor pp = random_tensor(2, 3, rng);
  for (OpId id : pool_candidates()) {
    OpWeights w = init_op_weights(id, 3, 3, rng);
    auto params = weight_list(w);
    params.push_back(h);
    auto r = finite_diff_check([&] { return sum(mul(apply_pool(id, h, segs, w), pp)); }, params);
    INFO(op_name(id));
    CHECK(r.max_rel_error < 1e-4);
  }
  Tensor a = random_tensor(6, 3, rng, true), b = random_tensor(6, 3, rng, true);
  for (OpId id : merge_candidates()) {
    Tensor weights = random_tensor(6, id == OpId::kConcatMerge ? 6 : 3, rng);
    auto r = finite_diff_check([&] { return sum(mul(apply_merge(id, {a, b}), weights)); }, {a, b});
    INFO(op_name(id));
    CHECK(r.max_rel_error < 1e-4);
  }
}
