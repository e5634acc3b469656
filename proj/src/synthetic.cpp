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

#include <numeric>
#include <stdexcept>

#include "dsgas/graph.hpp"
#include "dsgas/random.hpp"

namespace dsgas {

const char* to_string(FactorKind kind) { return kind == FactorKind::kStructure ? "structure" : "feature"; }

FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "structure") return FactorKind::kStructure;
  if (s == "feature") return FactorKind::kFeature;
  throw std::invalid_argument("unknown factor kind '" + s + "' (expected structure|feature)");
}

SyntheticSpec SyntheticSpec::planted_default() {
  SyntheticSpec spec;
  FactorSpec structure;
  structure.kind = FactorKind::kStructure;
  FactorSpec feature;
  feature.kind = FactorKind::kFeature;
  spec.factors = {structure, feature};
  return spec;
}

namespace {

constexpr std::size_t kVariants = 2;

void validate(const SyntheticSpec& spec) {
  if (spec.factors.size() < 2) throw std::invalid_argument("synthetic spec: need at least 2 factors");
  if (spec.num_graphs == 0) throw std::invalid_argument("synthetic spec: num_graphs must be positive");
  if (spec.bridge_prob < 0.0 || spec.bridge_prob > 1.0)
    throw std::invalid_argument("synthetic spec: bridge_prob outside [0, 1]");
  for (const auto& f : spec.factors) {
    if (f.min_nodes < 2 || f.max_nodes < f.min_nodes)
      throw std::invalid_argument("synthetic spec: need 2 <= min_nodes <= max_nodes");
    if (f.community_density <= 0.0 || f.community_density > 1.0)
      throw std::invalid_argument("synthetic spec: community_density outside (0, 1]");
    if (f.signal_noise < 0.0 || f.signal_level <= 0.0)
      throw std::invalid_argument("synthetic spec: signal_level must be > 0 and signal_noise >= 0");
  }
  if (spec.noise_std < 0.0) throw std::invalid_argument("synthetic spec: noise_std must be >= 0");
}

}  // namespace

GraphDataset make_synthetic_factors(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(derive_seed(spec.seed, Stream::kSynthetic));
  const std::size_t num_factors = spec.factors.size();
  std::size_t num_classes = 1;
  for (std::size_t f = 0; f < num_factors; ++f) num_classes *= kVariants;
  const std::size_t F = 1 + num_factors + spec.noise_features;

  GraphDataset ds;
  ds.name = "planted";
  ds.task = TaskKind::kGraphLevel;
  ds.num_features = F;
  ds.num_classes = num_classes;

  std::vector<std::size_t> order(spec.num_graphs);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);

  std::vector<Graph> graphs(spec.num_graphs);
  std::vector<std::vector<int>> variants(spec.num_graphs);
  for (std::size_t slot = 0; slot < spec.num_graphs; ++slot) {
    // combination ids cycle, so classes are balanced within one graph
    const std::size_t combo = slot % num_classes;
    std::vector<int> choice(num_factors);
    for (std::size_t f = 0, rest = combo; f < num_factors; ++f, rest /= kVariants)
      choice[f] = static_cast<int>(rest % kVariants);

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::size_t, std::size_t>> motif_range;
    for (std::size_t f = 0; f < num_factors; ++f) {
      const FactorSpec& fs = spec.factors[f];
      const std::size_t m = fs.min_nodes + uniform_index(rng, fs.max_nodes - fs.min_nodes + 1);
      const std::size_t base = rows.size();
      motif_range.emplace_back(base, base + m);
      for (std::size_t t = 0; t < m; ++t) {
        std::vector<double> row(F, 0.0);
        row[0] = 1.0;
        rows.push_back(std::move(row));
      }
      const std::size_t channel = 1 + f;
      if (fs.kind == FactorKind::kStructure) {
        if (choice[f] == 0) {
          for (std::size_t t = 1; t < m; ++t) edges.emplace_back(base + t - 1, base + t);
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a + 2; b < m; ++b)
              if (uniform01(rng) < fs.community_density) edges.emplace_back(base + a, base + b);
        } else {
          for (std::size_t t = 1; t < m; ++t) edges.emplace_back(base, base + t);
        }
        for (std::size_t t = 0; t < m; ++t) rows[base + t][channel] = fs.signal_level;
      } else {
        for (std::size_t t = 1; t < m; ++t) edges.emplace_back(base + uniform_index(rng, t), base + t);
        if (choice[f] == 0) {
          for (std::size_t t = 0; t < m; ++t) rows[base + t][channel] = fs.signal_level;
        } else {
          // same channel total as the level variant, concentrated on one node
          rows[base + uniform_index(rng, m)][channel] = fs.signal_level * static_cast<double>(m);
        }
      }
      for (std::size_t t = 0; t < m; ++t) rows[base + t][channel] += fs.signal_noise * standard_normal(rng);
    }
    for (std::size_t f = 0; f + 1 < num_factors; ++f) {
      bool bridged = false;
      for (std::size_t g = f + 1; g < num_factors; ++g)
        for (std::size_t a = motif_range[f].first; a < motif_range[f].second; ++a)
          for (std::size_t b = motif_range[g].first; b < motif_range[g].second; ++b)
            if (uniform01(rng) < spec.bridge_prob) {
              edges.emplace_back(a, b);
              if (g == f + 1) bridged = true;
            }
      if (!bridged) {
        const auto [a0, a1] = motif_range[f];
        const auto [b0, b1] = motif_range[f + 1];
        edges.emplace_back(a0 + uniform_index(rng, a1 - a0), b0 + uniform_index(rng, b1 - b0));
      }
    }
    std::vector<double> x;
    x.reserve(rows.size() * F);
    for (auto& row : rows) {
      for (std::size_t j = 1 + num_factors; j < F; ++j) row[j] = spec.noise_std * standard_normal(rng);
      x.insert(x.end(), row.begin(), row.end());
    }
    const std::size_t n = rows.size();
    const std::size_t target = order[slot];
    graphs[target] = make_graph(Tensor::from(n, F, std::move(x)), edges, static_cast<int>(combo));
    variants[target] = std::move(choice);
  }
  std::size_t directed = 0;
  for (const auto& g : graphs) directed += g.adj.num_edges();
  ds.directed_edges = directed;
  ds.undirected_edges = directed / 2;
  ds.graphs = std::move(graphs);
  ds.factor_variants = std::move(variants);
  return ds;
}

}  // namespace dsgas
