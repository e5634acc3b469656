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

#include "dsgas/disentangle.hpp"
#include "dsgas/gradcheck.hpp"
#include "test_util.hpp"

using namespace dsgas;
using dsgas::testing::max_abs_diff;
using dsgas::testing::random_tensor;

namespace {

std::vector<Tensor> random_factors(std::size_t K, std::size_t n, std::size_t d, Rng& rng, bool grad = false) {
  std::vector<Tensor> z;
  for (std::size_t k = 0; k < K; ++k) z.push_back(random_tensor(n, d, rng, grad));
  return z;
}

}  // namespace

TEST_CASE("infer_factor_probs: K=1, identical prototypes, row sums") {
  Rng rng(1);
  Tensor p1 = infer_factor_probs(random_factors(1, 5, 3, rng), random_tensor(1, 3, rng), random_tensor(1, 6, rng));
  for (double v : p1.values()) CHECK(v == 1.0);

  Tensor row = random_tensor(1, 6, rng);
  Tensor same = gather_rows(row, std::vector<std::size_t>{0, 0, 0});
  Tensor pu = infer_factor_probs(random_factors(3, 4, 3, rng), random_tensor(3, 3, rng), same);
  for (double v : pu.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-14));

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    const std::size_t K = 1 + uniform_index(r, 5), d = 1 + uniform_index(r, 6);
    Tensor p = infer_factor_probs(random_factors(K, 7, d, r, false), random_tensor(K, d, r, false, 3.0),
                                  random_tensor(K, 2 * d, r, false, 3.0));
    for (std::size_t i = 0; i < 7; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        s += p(i, k);
        CHECK(p(i, k) > 0.0);
        CHECK(p(i, k) <= 1.0);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("infer_factor_probs: scalar oracle for K=2, d=2") {
  std::vector<Tensor> z{Tensor::from(2, 2, {0.5, -1.0, 2.0, 0.3}), Tensor::from(2, 2, {-0.7, 0.4, 1.1, 1.5})};
  Tensor enc = Tensor::from(2, 2, {0.2, 0.9, -0.4, 0.6});
  Tensor c = Tensor::from(2, 4, {1.0, 0.0, -0.5, 0.3, 0.2, 0.8, 0.1, -1.2});
  Tensor p = infer_factor_probs(z, enc, c);
  for (std::size_t i = 0; i < 2; ++i) {
    long double post[2] = {0, 0};
    for (std::size_t j = 0; j < 2; ++j) {
      const long double x[4] = {z[j](i, 0), z[j](i, 1), enc(j, 0), enc(j, 1)};
      long double e[2];
      for (std::size_t k = 0; k < 2; ++k) {
        long double dot = 0;
        for (int t = 0; t < 4; ++t) dot += x[t] * c(k, t);
        e[k] = std::exp(dot / 2.0L);  // sqrt(4)
      }
      for (std::size_t k = 0; k < 2; ++k) post[k] += e[k] / (e[0] + e[1]) / 2.0L;
    }
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(p(i, k) - static_cast<double>(post[k])) < 1e-12);
  }
}

TEST_CASE("infer_factor_probs: positive similarity scaling keeps the argmax (single architecture)") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto z = random_factors(1, 6, 3, rng);
    Tensor enc = random_tensor(1, 3, rng);
    Tensor c = random_tensor(3, 6, rng);
    // K architectures collapse to one when all z_j and enc_j coincide
    std::vector<Tensor> zk{z[0], z[0], z[0]};
    Tensor ek = gather_rows(enc, std::vector<std::size_t>{0, 0, 0});
    Tensor a = infer_factor_probs(zk, ek, c);
    Tensor b = infer_factor_probs(zk, ek, scale(c, 3.5));
    for (std::size_t i = 0; i < 6; ++i) {
      std::size_t am = 0, bm = 0;
      for (std::size_t k = 1; k < 3; ++k) {
        if (a(i, k) > a(i, am)) am = k;
        if (b(i, k) > b(i, bm)) bm = k;
      }
      CHECK(am == bm);
    }
  }
}

TEST_CASE("factor_weighted_loss: uniform, one-hot, K=1 identity, NaN") {
  Rng rng(2);
  Tensor l = random_tensor(5, 3, rng);
  Tensor uniform = Tensor::full(5, 3, 1.0 / 3);
  CHECK(factor_weighted_loss(uniform, l).item() == doctest::Approx(mean(l).item()).epsilon(1e-14));

  Tensor hot = Tensor::zeros(5, 3);
  for (std::size_t i = 0; i < 5; ++i) hot.mutable_values()[i * 3 + 1] = 1.0;
  double col = 0.0;
  for (std::size_t i = 0; i < 5; ++i) col += l(i, 1);
  CHECK(factor_weighted_loss(hot, l).item() == doctest::Approx(col / 5).epsilon(1e-14));

  Tensor l1 = random_tensor(4, 1, rng);
  CHECK(factor_weighted_loss(Tensor::full(4, 1, 1.0), l1).item() == mean(l1).item());

  Tensor bad = Tensor::from(1, 2, {0.1, std::nan("")});
  CHECK_THROWS_AS(factor_weighted_loss(Tensor::full(1, 2, 0.5), bad), std::runtime_error);
}

TEST_CASE("Jensen bound holds on 100 random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t n = 1 + uniform_index(rng, 6), K = 1 + uniform_index(rng, 5);
    Tensor post = softmax_rows(random_tensor(n, K, rng, false, 2.0));
    std::vector<double> ps(n * K);
    for (double& v : ps) v = 0.01 + 0.98 * uniform01(rng);  // p(s | G, k)
    std::vector<double> losses(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) losses[i] = -std::log(ps[i]);
    const double lw = factor_weighted_loss(post, Tensor::from(n, K, losses)).item();
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mix = 0.0;
      for (std::size_t k = 0; k < K; ++k) mix += post(i, k) * ps[i * K + k];
      bound += -std::log(mix);
    }
    CHECK(lw >= bound / static_cast<double>(n) - 1e-12);
  }
}

TEST_CASE("posterior and weighted loss gradients pass the finite-difference check") {
  Rng rng(3);
  auto z = random_factors(2, 3, 2, rng, true);
  Tensor enc = random_tensor(2, 2, rng, true);
  Tensor c = random_tensor(2, 4, rng, true);
  Tensor losses = random_tensor(3, 2, rng, true);
  auto r = finite_diff_check([&] { return factor_weighted_loss(infer_factor_probs(z, enc, c), losses); },
                             {z[0], z[1], enc, c, losses});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("update_weights: zero gradient, zero lr, scalar Adam oracle") {
  Tensor w = Tensor::from(1, 1, {0.5}, true);
  std::vector<Tensor> params{w};
  Adam zero_grad_opt;
  update_weights(params, zero_grad_opt);
  CHECK(w.item() == 0.5);

  Adam frozen({.lr = 0.0});
  const double grads[3] = {0.3, -1.2, 0.7};
  for (double g : grads) {
    Tape tape;
    tape.backward(scale(w, g));
    update_weights(params, frozen);
    w.zero_grad();
  }
  CHECK(w.item() == 0.5);

  Adam adam({.lr = 0.1});
  double p = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    Tape tape;
    tape.backward(scale(w, g));
    update_weights(params, adam);
    w.zero_grad();
    m = 0.9 * m + (1 - 0.9) * g;
    v = 0.999 * v + (1 - 0.999) * g * g;
    p -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(w.item() == p);
  }
}
