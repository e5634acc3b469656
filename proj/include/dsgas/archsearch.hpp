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
#include <vector>

#include "dsgas/optim.hpp"
#include "dsgas/supernet.hpp"

namespace dsgas {

enum class ArchAugKind { kOpChoice, kWeight, kEmbed, kCompose };

/// Config names: alpha | weight | embed | compose.
const char* to_string(ArchAugKind kind);
ArchAugKind arch_aug_from_string(const std::string& s);

struct ArchAugSpec {
  ArchAugKind kind = ArchAugKind::kCompose;
  double r1 = 1.1;   // temperature range [1/r1, r1]
  double r2 = 0.1;   // fraction of weight entries perturbed
  double r3 = 0.05;  // fraction of mixed-op output entries dropped

  void validate() const;
};

/// A sampled architecture augmentation. Applied transiently: the base
/// super-network is never modified.
struct AugmentedForwardCtx {
  ArchAugKind applied = ArchAugKind::kOpChoice;  // never kCompose
  double temperature = 1.0;
  /// Additive noise per weight tensor, in SuperNet::visit order; empty when
  /// weights are not perturbed.
  std::vector<std::vector<double>> weight_noise;
  double embed_dropout = 0.0;
  std::uint64_t dropout_seed = 0;
};

AugmentedForwardCtx augment_architecture(const SuperNet& net, const ArchAugSpec& spec, std::uint64_t seed);

/// Shallow copy whose weight tensors are replaced by w + noise.
SuperNet perturbed_copy(const SuperNet& net, const AugmentedForwardCtx& ctx);

ForwardResult augmented_forward(const SuperNet& net, const GraphBatch& batch, const AugmentedForwardCtx& ctx);

enum class DiscriminationMode {
  /// Anchor z_ik against the K augmented views of graph i:
  ///   p_ik = exp phi(z_ik, z'_ik) / sum_j exp phi(z_ik, z'_ij)
  kAcrossFactors,
  /// Anchor z_ik against factor k's augmented views of the batch graphs:
  ///   p_ik = exp phi(z_ik, z'_ik) / sum_j exp phi(z_ik, z'_jk)
  kAcrossGraphs,
  /// Pairs normalized against each other:
  ///   p_ik = exp phi(z_ik, z'_ik) / sum_j exp phi(z_ij, z'_ij)
  /// Rows sum to one, so the search loss is the constant N log K. Kept only
  /// for comparison.
  kPairNormalized,
};

const char* to_string(DiscriminationMode mode);
DiscriminationMode discrimination_mode_from_string(const std::string& s);

/// Architecture-level instance discrimination probabilities, N x K.
Tensor arch_discrimination_probs(const std::vector<Tensor>& z, const std::vector<Tensor>& z_aug,
                                 DiscriminationMode mode = DiscriminationMode::kAcrossFactors);

inline constexpr double kProbFloor = 1e-12;

/// L_alpha = sum_i -log(max(mean_k probs[i, k], 1e-12)).
Tensor contrastive_search_loss(const Tensor& probs);

/// SGD step on the operation logits only.
void update_alpha(std::vector<Tensor>& theta, Sgd& optimizer);

}  // namespace dsgas
