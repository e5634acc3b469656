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

#include "dsgas/disentangle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsgas {

Tensor similarity(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("similarity: embedding widths differ");
  return scale(matmul_bt(a, b), 1.0 / std::sqrt(static_cast<double>(a.cols())));
}

Tensor infer_factor_probs(const std::vector<Tensor>& z, const Tensor& arch_enc, const Tensor& c) {
  const std::size_t K = z.size();
  if (K == 0) throw std::invalid_argument("infer_factor_probs: no factors");
  if (arch_enc.rows() != K || c.rows() != K)
    throw std::invalid_argument("infer_factor_probs: encodings and prototypes need K rows");
  const std::size_t n = z.front().rows();
  if (c.cols() != z.front().cols() + arch_enc.cols())
    throw std::invalid_argument("infer_factor_probs: prototype width must equal embedding + encoding width");

  Tensor total;
  for (std::size_t j = 0; j < K; ++j) {
    if (z[j].rows() != n) throw std::invalid_argument("infer_factor_probs: factor embeddings differ in row count");
    const std::vector<std::size_t> rows(n, j);
    const Tensor joint = concat_cols({z[j], gather_rows(arch_enc, rows)});
    const Tensor p = softmax_rows(similarity(joint, c));
    total = total.defined() ? add(total, p) : p;
  }
  return K == 1 ? total : scale(total, 1.0 / static_cast<double>(K));
}

Tensor factor_weighted_loss(const Tensor& posterior, const Tensor& losses) {
  if (posterior.rows() != losses.rows() || posterior.cols() != losses.cols())
    throw std::invalid_argument("factor_weighted_loss: posterior and losses differ in shape");
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (std::isnan(losses.values()[i]))
      throw std::runtime_error("factor_weighted_loss: NaN loss for instance " + std::to_string(i / losses.cols()) +
                               ", factor " + std::to_string(i % losses.cols()));
  return scale(sum(mul(posterior, losses)), 1.0 / static_cast<double>(losses.rows()));
}

void update_weights(std::vector<Tensor>& params, Adam& optimizer) { optimizer.step(params); }

}  // namespace dsgas
