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

#include <cstdio>

#include "dsgas/archsearch.hpp"
#include "dsgas/disentangle.hpp"
#include "dsgas/evalcli.hpp"
#include "dsgas/gradcheck.hpp"
#include "dsgas/pretext.hpp"
#include "dsgas/random.hpp"

namespace dsgas {

namespace {

constexpr std::size_t kFeatures = 3;
constexpr double kKinkRetry = 1e-4;

std::vector<Graph> random_graphs(Rng& rng) {
  std::vector<Graph> graphs;
  for (int g = 0; g < 3; ++g) {
    const std::size_t n = 4 + uniform_index(rng, 5);  // 4..8 nodes
    std::vector<double> x(n * kFeatures);
    for (double& v : x) v = standard_normal(rng);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t t = 1; t < n; ++t) edges.emplace_back(uniform_index(rng, t), t);  // connected
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 2; b < n; ++b)
        if (uniform01(rng) < 0.25) edges.emplace_back(a, b);
    graphs.push_back(make_graph(Tensor::from(n, kFeatures, std::move(x)), edges, g % 2));
  }
  return graphs;
}

void keep_worst(GradcheckSuiteResult& out, const GradCheckResult& r, const char* loss, std::uint64_t seed) {
  out.coordinates += r.coordinates;
  out.retried += r.retried;
  if (r.max_rel_error >= out.max_rel_error) {
    out.max_rel_error = r.max_rel_error;
    char vals[96];
    std::snprintf(vals, sizeof vals, ": analytic %.6g, numeric %.6g", r.worst_analytic, r.worst_numeric);
    out.worst = std::string(loss) + ", seed " + std::to_string(seed) + ", " + r.worst_param + "[" +
                std::to_string(r.worst_index) + "]" + vals;
  }
}

}  // namespace

GradcheckSuiteResult run_gradcheck_suite(std::size_t seeds, std::uint64_t first_seed) {
  GradcheckSuiteResult out;
  for (std::uint64_t seed = first_seed; seed < first_seed + seeds; ++seed) {
    Rng rng = make_rng(seed, Stream::kSynthetic);
    const std::vector<Graph> graphs = random_graphs(rng);
    std::vector<const Graph*> ptrs;
    for (const Graph& g : graphs) ptrs.push_back(&g);
    const GraphBatch batch = batch_graphs(ptrs);

    SuperNetConfig cfg;
    cfg.task = TaskKind::kGraphLevel;
    cfg.factors = 2;
    cfg.layers = 3;
    cfg.in_dim = kFeatures;
    cfg.hidden = 4;
    cfg.norm = NormKind::kBatch;
    cfg.theta_init_std = 0.5;  // away from the uniform point, so alphas differ
    SuperNet net = SuperNet::create(cfg, seed);
    Rng head_rng = make_rng(seed, Stream::kInit, 3);
    const ProjectionHead head = ProjectionHead::create(cfg.hidden, head_rng);

    std::vector<Tensor> params;
    std::vector<std::string> names;
    net.visit(SuperNet::Visitor([&](ParamGroup, const std::string& name, Tensor& t) {
      t.set_requires_grad(true);
      params.push_back(t);
      names.push_back(name);
    }));
    const char* head_names[] = {"head.w1", "head.b1", "head.w2", "head.b2"};
    for (std::size_t i = 0; i < 4; ++i) {
      params.push_back(head.parameters()[i]);
      names.push_back(head_names[i]);
    }

    const PretextConfig pre = PretextConfig::defaults_for(TaskKind::kGraphLevel);
    const auto views = make_view_batches(ptrs, pre.view1, pre.view2, derive_seed(seed, Stream::kViews));
    auto loss_w = [&] {
      const ForwardResult a = supernet_forward(net, views.first);
      const ForwardResult b = supernet_forward(net, views.second);
      const ForwardResult clean = supernet_forward(net, batch);
      const Tensor losses = per_factor_losses(a.factors, b.factors, head, pre.temperature);
      const Tensor post = infer_factor_probs(clean.factors, encode_arch(clean.alphas, net.encoder), net.prototypes);
      return factor_weighted_loss(post, losses);
    };
    keep_worst(out, finite_diff_check(loss_w, params, 1e-5, names, 1e-5, kKinkRetry), "L_w", seed);

    // Cycle the augmentation kind so every branch is covered.
    ArchAugSpec spec;
    static constexpr ArchAugKind kKinds[] = {ArchAugKind::kOpChoice, ArchAugKind::kWeight, ArchAugKind::kEmbed};
    spec.kind = kKinds[seed % 3];
    const AugmentedForwardCtx ctx = augment_architecture(net, spec, derive_seed(seed, Stream::kArchAug));
    auto loss_alpha = [&] {
      const ForwardResult clean = supernet_forward(net, batch);
      const ForwardResult aug = augmented_forward(net, batch, ctx);
      const Tensor probs = arch_discrimination_probs(clean.factors, aug.factors);
      return scale(contrastive_search_loss(probs), 1.0 / static_cast<double>(probs.rows()));
    };
    keep_worst(out, finite_diff_check(loss_alpha, params, 1e-5, names, 1e-5, kKinkRetry), "L_alpha", seed);
    ++out.seeds;
  }
  return out;
}

}  // namespace dsgas
