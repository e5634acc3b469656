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

#include <vector>

#include "dsgas/optim.hpp"
#include "dsgas/tensor.hpp"

namespace dsgas {

/// phi(a_i, b_j) = <a_i, b_j> / sqrt(dim) for every row pair: rows(a) x rows(b).
Tensor similarity(const Tensor& a, const Tensor& b);

/// Factor posterior p(k | G_i), N x K.
///
/// For each architecture j, p(k | G_i, alpha_j) = softmax_k phi([z_ij || enc_j], c_k),
/// then the K architectures are averaged under a uniform prior.
///   z:        K tensors of N x d, z[j] holds z_{., j}
///   arch_enc: K x d, row j encodes alpha_j
///   c:        K x 2d prototypes
Tensor infer_factor_probs(const std::vector<Tensor>& z, const Tensor& arch_enc, const Tensor& c);

/// L_w = (1/N) sum_i sum_k p(k | G_i) l_ik. Throws std::runtime_error on NaN
/// losses.
Tensor factor_weighted_loss(const Tensor& posterior, const Tensor& losses);

/// Adam step on the weight-level parameters (w, c, encoder map, head).
void update_weights(std::vector<Tensor>& params, Adam& optimizer);

}  // namespace dsgas
