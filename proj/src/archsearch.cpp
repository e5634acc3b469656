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

#include "dsgas/archsearch.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dsgas/disentangle.hpp"
#include "dsgas/random.hpp"

namespace dsgas {

const char* to_string(ArchAugKind kind) {
  switch (kind) {
    case ArchAugKind::kOpChoice:
      return "alpha";
    case ArchAugKind::kWeight:
      return "weight";
    case ArchAugKind::kEmbed:
      return "embed";
    case ArchAugKind::kCompose:
      return "compose";
  }
  return "?";
}

ArchAugKind arch_aug_from_string(const std::string& s) {
  if (s == "alpha") return ArchAugKind::kOpChoice;
  if (s == "weight") return ArchAugKind::kWeight;
  if (s == "embed") return ArchAugKind::kEmbed;
  if (s == "compose") return ArchAugKind::kCompose;
  throw std::invalid_argument("unknown architecture augmentation '" + s + "' (expected alpha|weight|embed|compose)");
}

void ArchAugSpec::validate() const {
  if (!(r1 >= 1.0)) throw std::invalid_argument("architecture augmentation: r1 must be >= 1");
  if (!(r2 >= 0.0 && r2 < 1.0)) throw std::invalid_argument("architecture augmentation: r2 must be in [0, 1)");
  if (!(r3 >= 0.0 && r3 < 1.0)) throw std::invalid_argument("architecture augmentation: r3 must be in [0, 1)");
}

namespace {

std::vector<double> weight_noise_for(const Tensor& w, double fraction, Rng& rng) {
  const std::size_t n = w.size();
  std::vector<double> noise(n, 0.0);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count == 0) return noise;
  double mu = 0.0, var = 0.0;
  for (double v : w.values()) mu += v;
  mu /= static_cast<double>(n);
  for (double v : w.values()) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / static_cast<double>(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  for (std::size_t i = 0; i < count; ++i) noise[idx[i]] = sigma * standard_normal(rng);
  return noise;
}

}  // namespace

AugmentedForwardCtx augment_architecture(const SuperNet& net, const ArchAugSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, Stream::kArchAug);
  AugmentedForwardCtx ctx;
  ctx.applied = spec.kind;
  if (spec.kind == ArchAugKind::kCompose) {
    static constexpr ArchAugKind kChoices[] = {ArchAugKind::kOpChoice, ArchAugKind::kWeight, ArchAugKind::kEmbed};
    ctx.applied = kChoices[uniform_index(rng, 3)];
  }
  switch (ctx.applied) {
    case ArchAugKind::kOpChoice:
      ctx.temperature = uniform(rng, 1.0 / spec.r1, spec.r1);
      break;
    case ArchAugKind::kWeight:
      for (const Tensor& w : net.parameters(ParamGroup::kWeight)) ctx.weight_noise.push_back(weight_noise_for(w, spec.r2, rng));
      break;
    case ArchAugKind::kEmbed:
      ctx.embed_dropout = spec.r3;
      ctx.dropout_seed = rng();
      break;
    case ArchAugKind::kCompose:
      break;
  }
  return ctx;
}

SuperNet perturbed_copy(const SuperNet& net, const AugmentedForwardCtx& ctx) {
  SuperNet copy = net;
  if (ctx.weight_noise.empty()) return copy;
  std::size_t i = 0;
  copy.visit(SuperNet::Visitor([&](ParamGroup g, const std::string& name, Tensor& t) {
    if (g != ParamGroup::kWeight) return;
    if (i >= ctx.weight_noise.size() || ctx.weight_noise[i].size() != t.size())
      throw std::invalid_argument("perturbed_copy: noise does not match weight '" + name + "'");
    t = add(t, Tensor::from(t.rows(), t.cols(), ctx.weight_noise[i]));
    ++i;
  }));
  return copy;
}

ForwardResult augmented_forward(const SuperNet& net, const GraphBatch& batch, const AugmentedForwardCtx& ctx) {
  ForwardOptions opts;
  opts.temperature = ctx.temperature;
  opts.embed_dropout = ctx.embed_dropout;
  opts.dropout_seed = ctx.dropout_seed;
  if (ctx.weight_noise.empty()) return supernet_forward(net, batch, opts);
  return supernet_forward(perturbed_copy(net, ctx), batch, opts);
}

const char* to_string(DiscriminationMode mode) {
  switch (mode) {
    case DiscriminationMode::kAcrossFactors:
      return "across_factors";
    case DiscriminationMode::kAcrossGraphs:
      return "across_graphs";
    case DiscriminationMode::kPairNormalized:
      return "pair_normalized";
  }
  return "?";
}

DiscriminationMode discrimination_mode_from_string(const std::string& s) {
  if (s == "across_factors") return DiscriminationMode::kAcrossFactors;
  if (s == "across_graphs") return DiscriminationMode::kAcrossGraphs;
  if (s == "pair_normalized") return DiscriminationMode::kPairNormalized;
  throw std::invalid_argument("unknown discrimination mode '" + s +
                              "' (expected across_factors|across_graphs|pair_normalized)");
}

namespace {

// phi(z_i, z'_i) for every row i: N x 1.
Tensor paired_similarity(const Tensor& a, const Tensor& b) {
  return scale(row_sum(mul(a, b)), 1.0 / std::sqrt(static_cast<double>(a.cols())));
}

Tensor join(std::vector<Tensor> cols) { return cols.size() == 1 ? cols.front() : concat_cols(cols); }

}  // namespace

Tensor arch_discrimination_probs(const std::vector<Tensor>& z, const std::vector<Tensor>& z_aug,
                                 DiscriminationMode mode) {
  const std::size_t K = z.size();
  if (K == 0 || z_aug.size() != K) throw std::invalid_argument("arch_discrimination_probs: factor counts differ");
  for (std::size_t k = 0; k < K; ++k)
    if (z[k].rows() != z[0].rows() || z[k].cols() != z[0].cols() || z_aug[k].rows() != z[0].rows() ||
        z_aug[k].cols() != z[0].cols())
      throw std::invalid_argument("arch_discrimination_probs: embedding shapes differ");

  std::vector<Tensor> cols;
  switch (mode) {
    case DiscriminationMode::kAcrossFactors:
      for (std::size_t k = 0; k < K; ++k) {
        std::vector<Tensor> logits;
        for (std::size_t j = 0; j < K; ++j) logits.push_back(paired_similarity(z[k], z_aug[j]));
        cols.push_back(slice_cols(softmax_rows(join(logits)), k, k + 1));
      }
      return join(cols);
    case DiscriminationMode::kAcrossGraphs:
      for (std::size_t k = 0; k < K; ++k) cols.push_back(diagonal(softmax_rows(similarity(z[k], z_aug[k]))));
      return join(cols);
    case DiscriminationMode::kPairNormalized:
      for (std::size_t k = 0; k < K; ++k) cols.push_back(paired_similarity(z[k], z_aug[k]));
      return softmax_rows(join(cols));
  }
  throw std::logic_error("arch_discrimination_probs: bad mode");
}

Tensor contrastive_search_loss(const Tensor& probs) {
  return scale(sum(log(clamp_min(row_mean(probs), kProbFloor))), -1.0);
}

void update_alpha(std::vector<Tensor>& theta, Sgd& optimizer) { optimizer.step(theta); }

}  // namespace dsgas
