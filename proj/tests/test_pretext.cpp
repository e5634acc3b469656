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

#include "dsgas/gradcheck.hpp"
#include "dsgas/optim.hpp"
#include "dsgas/pretext.hpp"
#include "dsgas/supernet.hpp"
#include "test_util.hpp"

using namespace dsgas;
using dsgas::testing::max_abs_diff;
using dsgas::testing::random_graph;
using dsgas::testing::random_tensor;

namespace {

bool same_graph(const Graph& a, const Graph& b) {
  return a.num_nodes() == b.num_nodes() && a.adj.edge_list() == b.adj.edge_list() &&
         max_abs_diff(a.features.values(), b.features.values()) == 0.0;
}

}  // namespace

TEST_CASE("make_views: zero ratio is the identity") {
  Rng rng(1);
  Graph g = random_graph(9, 14, 3, rng);
  for (ViewAugKind k : {ViewAugKind::kNodeDrop, ViewAugKind::kEdgePerturb, ViewAugKind::kFeatureMask}) {
    auto [a, b] = make_views(g, {k, 0.0}, {k, 0.0}, 5);
    CHECK(same_graph(a, g));
    CHECK(same_graph(b, g));
  }
}

TEST_CASE("node_drop: counts, incident edges, never empty") {
  Rng rng(2);
  Graph g = random_graph(10, 20, 2, rng);
  g.label = 3;
  auto [a, b] = make_views(g, {ViewAugKind::kNodeDrop, 0.2}, {ViewAugKind::kNodeDrop, 0.5}, 9);
  CHECK(a.num_nodes() == 8);
  CHECK(b.num_nodes() == 5);
  CHECK(a.label == 3);
  for (auto [s, d] : a.adj.edge_list()) CHECK((s < 8 && d < 8));

  Graph single = make_graph(Tensor::from(1, 2, {1.0, 2.0}), {});
  auto [c, e] = make_views(single, {ViewAugKind::kNodeDrop, 0.9}, {ViewAugKind::kNodeDrop, 0.5}, 1);
  CHECK(c.num_nodes() == 1);
  CHECK(e.num_nodes() == 1);
  CHECK_THROWS_AS(make_views(g, {ViewAugKind::kNodeDrop, 1.0}, {ViewAugKind::kNodeDrop, 0.1}, 1),
                  std::invalid_argument);
}

TEST_CASE("edge_perturb preserves the edge count (100 seeds)") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Graph g = random_graph(4 + uniform_index(rng, 12), 3 + uniform_index(rng, 20), 2, rng);
    auto [a, b] = make_views(g, {ViewAugKind::kEdgePerturb, 0.2}, {ViewAugKind::kEdgePerturb, 0.5}, seed);
    CHECK(a.num_undirected_edges() == g.num_undirected_edges());
    CHECK(b.num_undirected_edges() == g.num_undirected_edges());
  }
  // complete graph: no non-edges to add, so nothing changes
  std::vector<std::pair<std::size_t, std::size_t>> k4;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) k4.emplace_back(i, j);
  Graph full = make_graph(Tensor::full(4, 1, 1.0), k4);
  auto [a, b] = make_views(full, {ViewAugKind::kEdgePerturb, 0.5}, {ViewAugKind::kEdgePerturb, 0.5}, 3);
  CHECK(a.num_undirected_edges() == 6);
}

TEST_CASE("feature_mask zeroes whole columns") {
  Rng rng(4);
  Graph g = make_graph(Tensor::full(5, 10, 1.0), {{0, 1}, {1, 2}});
  Rng view_rng(7);
  Graph m = augment_view(g, {ViewAugKind::kFeatureMask, 0.2}, view_rng);
  std::size_t zero_cols = 0;
  for (std::size_t c = 0; c < 10; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 5; ++r) s += m.features(r, c);
    if (s == 0.0) ++zero_cols;
    else CHECK(s == 5.0);
  }
  CHECK(zero_cols == 2);
}

TEST_CASE("make_views is reproducible bit-exactly") {
  Rng rng(5);
  Graph g = random_graph(12, 20, 3, rng);
  for (ViewAugKind k : {ViewAugKind::kNodeDrop, ViewAugKind::kEdgePerturb, ViewAugKind::kFeatureMask}) {
    auto [a1, b1] = make_views(g, {k, 0.3}, {k, 0.2}, 42);
    auto [a2, b2] = make_views(g, {k, 0.3}, {k, 0.2}, 42);
    CHECK(same_graph(a1, a2));
    CHECK(same_graph(b1, b2));
  }
}

TEST_CASE("nt_xent: scalar oracle on a batch of two") {
  // a1 = b1 = e1, a2 = b2 = e2: positives cos 1 / (1 + eps), negatives 0, t = 1.
  Tensor a = Tensor::from(2, 2, {1.0, 0.0, 0.0, 1.0});
  Tensor l = nt_xent(a, a, 1.0);
  REQUIRE(l.rows() == 2);
  REQUIRE(l.cols() == 1);
  const double expect = -std::log(std::exp(1.0 / (1.0 + kCosineEps)) / std::exp(0.0));
  CHECK(std::abs(l(0, 0) - expect) < 1e-12);
  CHECK(std::abs(l(1, 0) - expect) < 1e-12);

  // general hand case: compute cosines by hand
  Tensor x = Tensor::from(3, 2, {1.0, 2.0, -1.0, 0.5, 0.3, -2.0});
  Tensor y = Tensor::from(3, 2, {0.7, 1.1, -2.0, 0.1, 1.0, -1.0});
  const double t = 0.5;
  Tensor got = nt_xent(x, y, t);
  for (std::size_t i = 0; i < 3; ++i) {
    auto cosine = [&](std::size_t p, std::size_t q) {
      const double dot = x(p, 0) * y(q, 0) + x(p, 1) * y(q, 1);
      const double nx = x(p, 0) * x(p, 0) + x(p, 1) * x(p, 1) + kCosineEps;
      const double ny = y(q, 0) * y(q, 0) + y(q, 1) * y(q, 1) + kCosineEps;
      return dot / std::sqrt(nx * ny);
    };
    double den = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) den += std::exp(cosine(i, j) / t);
    CHECK(std::abs(got(i, 0) - (-std::log(std::exp(cosine(i, i) / t) / den))) < 1e-12);
  }
  CHECK_THROWS_AS(nt_xent(Tensor::from(1, 2, {1.0, 0.0}), Tensor::from(1, 2, {1.0, 0.0}), 0.5),
                  std::invalid_argument);
}

TEST_CASE("nt_xent: gradients stay finite and correct at an exact zero row") {
  // A dead ReLU head emits all-zero rows; the smoothed cosine is differentiable there.
  Rng rng(12);
  Tensor a = random_tensor(4, 3, rng, true), b = random_tensor(4, 3, rng, true);
  for (std::size_t j = 0; j < 3; ++j) a.mutable_values()[j] = 0.0;
  auto r = finite_diff_check([&] { return sum(nt_xent(a, b, 0.5)); }, {a, b}, 1e-6, {"a", "b"});
  CHECK(r.max_rel_error < 1e-4);
  CHECK(std::isfinite(r.max_abs_error));
}

TEST_CASE("nt_xent: separated pairs beat uniform embeddings; permutation equivariance") {
  Rng rng(6);
  Tensor good = Tensor::from(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor flat = Tensor::full(3, 3, 1.0);
  CHECK(sum(nt_xent(good, good, 0.5)).item() < sum(nt_xent(flat, flat, 0.5)).item());

  Tensor a = random_tensor(5, 4, rng), b = random_tensor(5, 4, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor la = nt_xent(a, b, 0.5);
  Tensor lp = nt_xent(gather_rows(a, perm), gather_rows(b, perm), 0.5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(lp(i, 0) - la(perm[i], 0)) < 1e-12);
}

TEST_CASE("projection head alone can reduce the pretext loss (50 steps)") {
  Rng rng(7);
  Tensor a = random_tensor(6, 4, rng);
  Tensor b = add(a, random_tensor(6, 4, rng, false, 0.3));
  ProjectionHead head = ProjectionHead::create(4, rng);
  auto params = head.parameters();
  Adam adam({.lr = 1e-2});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    Tape tape;
    Tensor loss = mean(per_factor_losses({a}, {b}, head, 0.5));
    if (step == 0) first = loss.item();
    last = loss.item();
    tape.backward(loss);
    adam.step(params);
  }
  CHECK(last < first);
}

TEST_CASE("pretext loss gradients pass the finite-difference check") {
  Rng rng(8);
  SuperNetConfig cfg;
  cfg.factors = 2;
  cfg.layers = 2;
  cfg.in_dim = 3;
  cfg.hidden = 4;
  SuperNet net = SuperNet::create(cfg, 3);
  for (auto& th : net.theta)
    for (double& v : th.mutable_values()) v = standard_normal(rng);
  std::vector<Graph> gs;
  for (int i = 0; i < 3; ++i) gs.push_back(random_graph(4 + uniform_index(rng, 4), 8, 3, rng));
  std::vector<const Graph*> ptrs;
  for (const auto& g : gs) ptrs.push_back(&g);
  auto [v1, v2] = make_view_batches(ptrs, {ViewAugKind::kNodeDrop, 0.2}, {ViewAugKind::kEdgePerturb, 0.2}, 11);
  ProjectionHead head = ProjectionHead::create(4, rng);
  auto params = net.parameters(ParamGroup::kWeight);
  for (const auto& p : net.parameters(ParamGroup::kArch)) params.push_back(p);
  for (const auto& p : head.parameters()) params.push_back(p);
  auto r = finite_diff_check(
      [&] {
        auto f1 = supernet_forward(net, v1).factors;
        auto f2 = supernet_forward(net, v2).factors;
        return mean(per_factor_losses(f1, f2, head, 0.5));
      },
      params);
  INFO("worst ", r.worst_param, " a=", r.worst_analytic, " fd=", r.worst_numeric);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("sample_nodes: distinct, sorted, capped") {
  Rng rng(9);
  auto all = sample_nodes(5, 10, rng);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  auto some = sample_nodes(100, 7, rng);
  CHECK(some.size() == 7);
  CHECK(std::is_sorted(some.begin(), some.end()));
  CHECK(std::adjacent_find(some.begin(), some.end()) == some.end());
}

TEST_CASE("pretext config validation") {
  PretextConfig node = PretextConfig::defaults_for(TaskKind::kNodeLevel);
  CHECK_NOTHROW(node.validate());
  node.view1 = {ViewAugKind::kNodeDrop, 0.2};
  CHECK_THROWS_AS(node.validate(), std::invalid_argument);
  PretextConfig g;
  g.temperature = 0.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
