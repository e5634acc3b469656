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

// Acceptance checks 1-10. Prints one line per criterion:
//   criterion N <name>: PASS|FAIL|SKIP (<measurements>)
// With --criterion N only that one runs and the exit code is 0 (pass),
// 1 (fail) or 77 (skip). Without it every criterion runs and the exit code is
// 1 when any failed. --expect-fail registers a criterion known to fail: exit
// 0 when it was evaluated and failed, 1 when it passed or could not run.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "dsgas/archsearch.hpp"
#include "dsgas/disentangle.hpp"
#include "dsgas/evalcli.hpp"
#include "dsgas/pretext.hpp"
#include "dsgas/random.hpp"
#include "dsgas/trainer.hpp"

namespace dsgas {
namespace {

using Clock = std::chrono::steady_clock;

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
  bool error = false;  // the criterion could not be evaluated
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = scale * standard_normal(rng);
  return Tensor::from(r, c, std::move(v));
}

Graph random_connected_graph(std::size_t n, std::size_t extra_edges, std::size_t F, Rng& rng, int label) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t t = 1; t < n; ++t) e.emplace_back(uniform_index(rng, t), t);
  for (std::size_t i = 0; i < extra_edges; ++i) e.emplace_back(uniform_index(rng, n), uniform_index(rng, n));
  return make_graph(random_tensor(n, F, rng), e, label);
}

GraphBatch random_batch(std::uint64_t seed, std::size_t graphs, std::size_t F) {
  Rng rng = make_rng(seed, Stream::kSynthetic);
  std::vector<Graph> gs;
  for (std::size_t i = 0; i < graphs; ++i)
    gs.push_back(random_connected_graph(3 + uniform_index(rng, 6), 3, F, rng, static_cast<int>(i % 2)));
  return batch_graphs(gs);
}

SuperNetConfig net_config(TaskKind task, std::size_t K, std::size_t F, std::size_t d, std::size_t L) {
  SuperNetConfig c;
  c.task = task;
  c.factors = K;
  c.layers = L;
  c.in_dim = F;
  c.hidden = d;
  c.norm = task == TaskKind::kGraphLevel ? NormKind::kBatch : NormKind::kLayer;
  c.theta_init_std = 1.0;  // distinct alphas per factor
  return c;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool bit_identical(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::memcmp(&x, &y, sizeof x) == 0;
         });
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return (h ^ v) * 1099511628211ull; }

std::uint64_t vec_hash(std::uint64_t h, const std::vector<std::vector<double>>& vs) {
  for (const auto& v : vs) h = mix(h, hash_values(Tensor::from(1, v.size(), v)));
  return h;
}

// Every bit of trainable and optimizer state.
std::uint64_t state_hash(const TrainState& s) {
  std::uint64_t h = 1469598103934665603ull;
  s.net.visit(SuperNet::ConstVisitor([&](ParamGroup, const std::string&, const Tensor& t) { h = mix(h, hash_values(t)); }));
  for (const Tensor& t : s.head.parameters()) h = mix(h, hash_values(t));
  h = mix(h, s.adam.steps());
  h = vec_hash(h, s.adam.first_moments());
  h = vec_hash(h, s.adam.second_moments());
  return vec_hash(h, s.sgd.velocity());
}

// ---- 1 ---------------------------------------------------------------------

Outcome criterion1() {
  const auto t0 = Clock::now();
  const GradcheckSuiteResult r = run_gradcheck_suite(10);
  const double secs = seconds_since(t0);
  const bool ok = r.seeds == 10 && r.max_rel_error < 1e-4 && secs < 60.0;
  return {ok ? Status::kPass : Status::kFail,
          fmt("max rel. error %.3e < 1e-4 over %zu coordinates, %zu seeds, %zu kink re-measurements; %.1f s < 60 s; "
              "worst %s",
              r.max_rel_error, r.coordinates, r.seeds, r.retried, secs, r.worst.c_str())};
}

// ---- 2 ---------------------------------------------------------------------

Outcome criterion2() {
  double mixed_err = 0.0, spmm_err = 0.0, post_err = 0.0, disc_err = 0.0, search_err = 0.0, ntx_err = 0.0;

  // mixed_op_forward vs sum_i alpha_i op_i, every slot of a graph and a node net.
  for (TaskKind task : {TaskKind::kGraphLevel, TaskKind::kNodeLevel}) {
    const SuperNet net = SuperNet::create(net_config(task, 2, 3, 4, 3), 21);
    const GraphBatch b = random_batch(22, 3, 3);
    Rng rng = make_rng(23, Stream::kSynthetic);
    for (std::size_t slot = 0; slot < net.slots.size(); ++slot) {
      const Tensor alpha = mixed_alpha(random_tensor(2, net.slots[slot].candidates.size(), rng));
      std::vector<Tensor> in;
      switch (net.slots[slot].category) {
        case OpCategory::kAgg:
          in = {net.slots[slot].layer == 0 ? b.features : random_tensor(b.num_nodes(), 4, rng)};
          break;
        case OpCategory::kPool:
          in = {random_tensor(b.num_nodes(), 4, rng)};
          break;
        case OpCategory::kMerge:
          for (std::size_t l = 0; l < 3; ++l)
            in.push_back(random_tensor(task == TaskKind::kGraphLevel ? 3 : b.num_nodes(), 4, rng));
          break;
      }
      for (std::size_t k = 0; k < 2; ++k) {
        const Tensor got = mixed_op_forward(net, slot, alpha, k, in, b);
        std::vector<double> expect(got.size(), 0.0);
        for (std::size_t i = 0; i < alpha.cols(); ++i) {
          const Tensor o = candidate_forward(net, slot, i, in, b);
          for (std::size_t j = 0; j < expect.size(); ++j) expect[j] += alpha(k, i) * o.values()[j];
        }
        mixed_err = std::max(mixed_err, max_abs_diff(got.values(), expect));
      }
    }
  }

  // spmm vs a dense matrix assembled here from the edge arrays.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, Stream::kSynthetic, 2);
    const std::size_t n = 5 + uniform_index(rng, 10), d = 1 + uniform_index(rng, 6);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (uniform01(rng) < 0.3) {
          edges.emplace_back(i, j);
          w.push_back(standard_normal(rng));
        }
    const bool weighted = seed % 2 == 1;
    const SparseAdj adj = weighted ? SparseAdj(n, edges, w) : SparseAdj(n, edges);
    const Tensor x = random_tensor(n, d, rng);
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) dense[edges[e].second * n + edges[e].first] += weighted ? w[e] : 1.0;
    std::vector<double> expect(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < d; ++c) expect[i * d + c] += dense[i * n + j] * x(j, c);
    spmm_err = std::max(spmm_err, max_abs_diff(spmm(adj, x).values(), expect));
  }

  // Hand-sized instances against long-double scalar arithmetic.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, Stream::kSynthetic, 3);
    const std::size_t K = 1 + uniform_index(rng, 4), n = 2 + uniform_index(rng, 4), d = 1 + uniform_index(rng, 4);
    std::vector<Tensor> z, za;
    for (std::size_t k = 0; k < K; ++k) {
      z.push_back(random_tensor(n, d, rng));
      za.push_back(random_tensor(n, d, rng));
    }
    const Tensor enc = random_tensor(K, d, rng), c = random_tensor(K, 2 * d, rng);

    // p(k|G_i) = 1/K sum_j softmax_k(<[z_j,i ; enc_j], c_k> / sqrt(2d))
    const Tensor post = infer_factor_probs(z, enc, c);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<long double> p(K, 0.0L);
      for (std::size_t j = 0; j < K; ++j) {
        std::vector<long double> e(K);
        long double den = 0.0L;
        for (std::size_t k = 0; k < K; ++k) {
          long double dot = 0.0L;
          for (std::size_t t = 0; t < d; ++t) dot += z[j](i, t) * c(k, t) + enc(j, t) * c(k, d + t);
          den += e[k] = std::exp(dot / std::sqrt(static_cast<long double>(2 * d)));
        }
        for (std::size_t k = 0; k < K; ++k) p[k] += e[k] / den / static_cast<long double>(K);
      }
      for (std::size_t k = 0; k < K; ++k)
        post_err = std::max(post_err, std::abs(post(i, k) - static_cast<double>(p[k])));
    }

    // p(k | i) = exp(phi(z_k,i, za_k,i)) / sum_j exp(phi(z_k,i, za_j,i)), phi = <.,.>/sqrt(d)
    const Tensor probs = arch_discrimination_probs(z, za);
    long double search = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      long double row = 0.0L;
      for (std::size_t k = 0; k < K; ++k) {
        auto phi = [&](std::size_t j) {
          long double dot = 0.0L;
          for (std::size_t t = 0; t < d; ++t) dot += static_cast<long double>(z[k](i, t)) * za[j](i, t);
          return std::exp(dot / std::sqrt(static_cast<long double>(d)));
        };
        long double den = 0.0L;
        for (std::size_t j = 0; j < K; ++j) den += phi(j);
        const long double pk = phi(k) / den;
        disc_err = std::max(disc_err, std::abs(probs(i, k) - static_cast<double>(pk)));
        row += probs(i, k);
      }
      search -= std::log(std::max(row / static_cast<long double>(K), 1e-12L));
    }
    search_err = std::max(search_err, std::abs(contrastive_search_loss(probs).item() - static_cast<double>(search)));

    // NT-Xent with in-batch negatives and the smoothed cosine.
    const double tau = 0.2 + uniform01(rng);
    const Tensor a = z[0], bb = za[0];
    const Tensor got = nt_xent(a, bb, tau);
    for (std::size_t i = 0; i < n; ++i) {
      auto cosine = [&](std::size_t p, std::size_t q) {
        long double dot = 0.0L, na = kCosineEps, nb = kCosineEps;
        for (std::size_t t = 0; t < d; ++t) {
          dot += static_cast<long double>(a(p, t)) * bb(q, t);
          na += static_cast<long double>(a(p, t)) * a(p, t);
          nb += static_cast<long double>(bb(q, t)) * bb(q, t);
        }
        return dot / std::sqrt(na * nb);
      };
      long double den = 0.0L;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den += std::exp(cosine(i, j) / tau);
      const long double expect = -(cosine(i, i) / tau - std::log(den));
      ntx_err = std::max(ntx_err, std::abs(got(i, 0) - static_cast<double>(expect)));
    }
  }

  const bool ok = mixed_err <= 1e-10 && spmm_err <= 1e-10 && post_err <= 1e-9 && disc_err <= 1e-9 &&
                  search_err <= 1e-9 && ntx_err <= 1e-9;
  return {ok ? Status::kPass : Status::kFail,
          fmt("mixed op %.1e, spmm %.1e (<= 1e-10); posterior %.1e, discrimination %.1e, search loss %.1e, "
              "NT-Xent %.1e (<= 1e-9)",
              mixed_err, spmm_err, post_err, disc_err, search_err, ntx_err)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome criterion3() {
  double row_err = 0.0;
  std::size_t jensen_ok = 0, argmax_flips = 0, taus = 0;
  double min_gap = INFINITY;

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_rng(seed, Stream::kSynthetic, 4);
    const std::size_t K = 1 + uniform_index(rng, 4), d = 2 + uniform_index(rng, 5), n = 2 + uniform_index(rng, 6);
    std::vector<Tensor> z1, z2, z;
    for (std::size_t k = 0; k < K; ++k) {
      z1.push_back(random_tensor(n, d, rng));
      z2.push_back(random_tensor(n, d, rng));
      z.push_back(random_tensor(n, d, rng));
    }
    const Tensor post = infer_factor_probs(z, random_tensor(K, d, rng), random_tensor(K, 2 * d, rng, 2.0));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += post(i, k);
      row_err = std::max(row_err, std::abs(s - 1.0));
    }

    // L_w = 1/N sum_i sum_k p(k|G_i) (-log p(s|G_i,k)) >= 1/N sum_i -log sum_k p(k|G_i) p(s|G_i,k)
    const ProjectionHead head = ProjectionHead::create(d, rng);
    const Tensor losses = per_factor_losses(z1, z2, head, 0.5);
    const double lw = factor_weighted_loss(post, losses).item();
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mixp = 0.0;
      for (std::size_t k = 0; k < K; ++k) mixp += post(i, k) * std::exp(-losses(i, k));
      bound -= std::log(mixp);
    }
    bound /= static_cast<double>(n);
    min_gap = std::min(min_gap, lw - bound);
    jensen_ok += lw >= bound - 1e-12;
  }

  // Temperatures drawn by the op-choice augmentation (r1 = 1.1) and directly.
  const SuperNet net = SuperNet::create(net_config(TaskKind::kGraphLevel, 4, 3, 4, 3), 31);
  Rng rng = make_rng(32, Stream::kSynthetic);
  auto argmax_rows = [](const Tensor& a) {
    std::vector<std::size_t> out(a.rows(), 0);
    for (std::size_t k = 0; k < a.rows(); ++k)
      for (std::size_t i = 1; i < a.cols(); ++i)
        if (a(k, i) > a(k, out[k])) out[k] = i;
    return out;
  };
  for (std::uint64_t s = 0; s < 200; ++s) {
    const double tau = s < 100 ? augment_architecture(net, {ArchAugKind::kOpChoice, 1.1, 0.1, 0.05}, s).temperature
                               : 1.0 / 1.1 + uniform01(rng) * (1.1 - 1.0 / 1.1);
    if (tau < 1.0 / 1.1 || tau > 1.1) ++argmax_flips;
    for (const Tensor& th : net.theta) {
      ++taus;
      if (argmax_rows(mixed_alpha(th, 1.0)) != argmax_rows(mixed_alpha(th, tau))) ++argmax_flips;
    }
  }

  const bool ok = row_err <= 1e-9 && jensen_ok == 100 && argmax_flips == 0;
  return {ok ? Status::kPass : Status::kFail,
          fmt("posterior row-sum error %.1e <= 1e-9; Jensen holds %zu/100 (min gap %.3e); argmax changes %zu over "
              "%zu (tau, slot) pairs",
              row_err, jensen_ok, min_gap, argmax_flips, taus)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome criterion4() {
  std::string detail;
  bool ok = true;
  for (TaskKind task : {TaskKind::kGraphLevel, TaskKind::kNodeLevel}) {
    SearchConfig c = SearchConfig::defaults_for(task);
    auto count = [&](std::size_t K) {
      c.factors = K;
      const TrainState s = init_train_state(c, 7);
      std::size_t n = s.net.parameter_count(ParamGroup::kWeight) + s.net.parameter_count(ParamGroup::kEncoder);
      for (const Tensor& t : s.head.parameters()) n += t.size();
      return std::pair{n, s.net.parameter_count(ParamGroup::kArch) + s.net.parameter_count(ParamGroup::kPrototype)};
    };
    const auto [w1, a1] = count(1);
    const auto [w4, a4] = count(4);
    ok = ok && w1 == w4;
    detail += fmt("%s%s: weights K=1 %zu, K=4 %zu (theta+c %zu vs %zu)", detail.empty() ? "" : "; ",
                  task == TaskKind::kGraphLevel ? "graph" : "node", w1, w4, a1, a4);
  }
  return {ok ? Status::kPass : Status::kFail, detail};
}

// ---- 5 ---------------------------------------------------------------------

const char* mutag_dir() {
  const char* dir = std::getenv("DSGAS_MUTAG_DIR");
  return dir && *dir ? dir : nullptr;
}

// MUTAG-sized stand-in: 128 molecules-like graphs of 10-28 nodes, 7 one-hot
// node labels, a few rings.
GraphDataset mutag_shaped() {
  Rng rng = make_rng(0, Stream::kSynthetic, 5);
  GraphDataset ds;
  ds.num_features = 7;
  ds.num_classes = 2;
  for (int g = 0; g < 128; ++g) {
    const std::size_t n = 10 + uniform_index(rng, 19);
    std::vector<double> x(n * 7, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i * 7 + uniform_index(rng, 7)] = 1.0;
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t t = 1; t < n; ++t) e.emplace_back(t - 1 - uniform_index(rng, std::min<std::size_t>(t, 2)), t);
    for (int r = 0; r < 2; ++r) e.emplace_back(uniform_index(rng, n), uniform_index(rng, n));
    ds.graphs.push_back(make_graph(Tensor::from(n, 7, std::move(x)), e, g % 2));
  }
  return ds;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Median forward + backward time of the default super-network on `batch`.
double forward_backward_ms(std::size_t K, const GraphBatch& batch, std::size_t in_dim) {
  SearchConfig c = SearchConfig::defaults_for(TaskKind::kGraphLevel);
  c.factors = K;
  SuperNet net = SuperNet::create(c.supernet_config(in_dim), 0);
  std::vector<Tensor> params;
  net.visit(SuperNet::Visitor([&](ParamGroup, const std::string&, Tensor& t) {
    t.set_requires_grad(true);
    params.push_back(t);
  }));
  auto once = [&] {
    const auto t0 = Clock::now();
    {
      Tape tape;
      const ForwardResult r = supernet_forward(net, batch);
      tape.backward(mean(mul(r.z, r.z)));
    }
    for (Tensor& p : params) p.zero_grad();
    return seconds_since(t0) * 1e3;
  };
  once();  // warm-up
  std::vector<double> trials;
  for (int t = 0; t < 10; ++t) trials.push_back(once());
  return median(trials);
}

Outcome criterion5() {
  const char* dir = mutag_dir();
  const bool real = dir != nullptr;
  GraphDataset ds = real ? parse_tudataset(dir, "MUTAG") : mutag_shaped();
  std::vector<std::size_t> idx(std::min<std::size_t>(128, ds.graphs.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const GraphBatch batch = batch_graphs(ds, idx);
  const double t1 = forward_backward_ms(1, batch, ds.num_features);
  const double t4 = forward_backward_ms(4, batch, ds.num_features);
  const double ratio = t4 / t1;
  const std::string m = fmt("K=4 %.2f ms / K=1 %.2f ms = %.2fx (limit 4.5x), median of 10, %zu graphs", t4, t1, ratio,
                            idx.size());
  if (!real) return {Status::kSkip, "DSGAS_MUTAG_DIR unset; MUTAG-shaped synthetic stand-in: " + m};
  return {ratio <= 4.5 ? Status::kPass : Status::kFail, "MUTAG " + m};
}

// ---- 6 and 7 ---------------------------------------------------------------

struct SyntheticRun {
  double probe = 0.0;
  double cos_init = 0.0, cos_final = 0.0;
  double seconds = 0.0;
};

// Default graph-task search on the default planted-factor dataset; only K
// differs between the full model and the ablation.
SyntheticRun synthetic_run(std::size_t K, std::uint64_t seed) {
  static std::map<std::pair<std::size_t, std::uint64_t>, SyntheticRun> cache;
  if (auto it = cache.find({K, seed}); it != cache.end()) return it->second;
  SearchConfig c = SearchConfig::defaults_for(TaskKind::kGraphLevel);
  c.seed = seed;
  c.factors = K;
  const auto t0 = Clock::now();
  const SearchResult r = run_unsupervised_search(c);
  ProbeProtocol p = ProbeProtocol::defaults_for(ProbeKind::kGraphFolds);
  p.seed = seed;
  SyntheticRun out;
  out.probe = linear_probe(r.embeddings, r.labels, p).mean;
  out.cos_init = r.alpha_cosine.front();
  out.cos_final = r.alpha_cosine.back();
  out.seconds = seconds_since(t0);
  std::fprintf(stderr, "  synthetic run K=%zu seed %llu: probe %.4f, alpha cosine %.6f -> %.6f, %.0f s\n", K,
               static_cast<unsigned long long>(seed), out.probe, out.cos_init, out.cos_final, out.seconds);
  return cache[{K, seed}] = out;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  double full = 0.0, ablated = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticRun a = synthetic_run(2, seed), b = synthetic_run(1, seed);
    full += a.probe / 5.0;
    ablated += b.probe / 5.0;
    per_seed += fmt("%s%.3f/%.3f", seed ? " " : "", a.probe, b.probe);
  }
  const double secs = seconds_since(t0);
  const double gap = 100.0 * (full - ablated);
  const bool ok = gap >= 5.0 && secs < 1800.0;
  return {ok ? Status::kPass : Status::kFail,
          fmt("probe accuracy K=2 %.4f vs K=1 %.4f, gap %+.2f points (need >= 5); per seed K=2/K=1 %s; %.0f s < 1800 s",
              full, ablated, gap, per_seed.c_str(), secs)};
}

Outcome criterion7() {
  std::size_t lower = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticRun r = synthetic_run(2, seed);
    lower += r.cos_final < r.cos_init;
    per_seed += fmt("%s%.6f->%.6f", seed ? " " : "", r.cos_init, r.cos_final);
  }
  return {lower == 5 ? Status::kPass : Status::kFail,
          fmt("alpha cosine lower at the end in %zu/5 seeds (K=2, 200 epochs): %s", lower, per_seed.c_str())};
}

// ---- 8 ---------------------------------------------------------------------

Outcome criterion8() {
  const char* dir = mutag_dir();
  if (!dir) return {Status::kSkip, "DSGAS_MUTAG_DIR unset; MUTAG is not bundled"};
  SearchConfig c = SearchConfig::defaults_for(TaskKind::kGraphLevel);
  c.dataset.source = DatasetSource::kTuDataset;
  c.dataset.path = dir;
  c.dataset.name = "MUTAG";
  apply_env_overrides(c);
  const GraphDataset ds = load_dataset(c);
  const bool shape = ds.graphs.size() == 188 && ds.num_features == 7 && ds.num_classes == 2;
  const auto t0 = Clock::now();
  const SearchResult r = run_unsupervised_search(c, ds);
  const double secs = seconds_since(t0);
  ProbeProtocol p = ProbeProtocol::defaults_for(ProbeKind::kGraphFolds);
  p.seed = c.seed;
  const ProbeReport rep = linear_probe(r.embeddings, r.labels, p);
  const bool ok = shape && secs < 1200.0 && rep.mean >= 0.75;
  return {ok ? Status::kPass : Status::kFail,
          fmt("%zu graphs / %zu features / %zu classes (want 188/7/2); search %zu epochs in %.0f s < 1200 s; probe "
              "%.4f ± %.4f (need >= 0.75)",
              ds.graphs.size(), ds.num_features, ds.num_classes, r.loss_w.size(), secs, rep.mean, rep.std)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome criterion9() {
  SearchConfig c = SearchConfig::defaults_for(TaskKind::kGraphLevel);
  c.seed = 17;
  c.epochs = 6;
  const GraphDataset ds = load_dataset(c);
  const SearchResult a = run_unsupervised_search(c, ds);
  const SearchResult b = run_unsupervised_search(c, ds);
  const bool same = a.loss_w == b.loss_w && a.loss_alpha == b.loss_alpha && a.alpha_cosine == b.alpha_cosine &&
                    state_hash(a.state) == state_hash(b.state) && bit_identical(a.embeddings.values(), b.embeddings.values());

  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "dsgas_acceptance_resume";
  std::filesystem::remove_all(dir);
  c.output_dir = dir.string();
  RunOptions stop;
  stop.stop_after = 3;
  const SearchResult part = run_unsupervised_search(c, ds, stop);
  RunOptions resume;
  resume.resume_from = part.checkpoint_path;
  const SearchResult r = run_unsupervised_search(c, ds, resume);
  const bool resumed = r.loss_w == a.loss_w && r.loss_alpha == a.loss_alpha && r.alpha_cosine == a.alpha_cosine &&
                       state_hash(r.state) == state_hash(a.state) &&
                       bit_identical(r.embeddings.values(), a.embeddings.values());
  std::filesystem::remove_all(dir);
  return {same && resumed ? Status::kPass : Status::kFail,
          fmt("two fixed-seed runs %s; stop at epoch 3 + resume vs uninterrupted %s (curves, parameters, optimizer "
              "state, embeddings; 6 epochs, K=4)",
              same ? "bit-identical" : "DIFFER", resumed ? "bit-identical" : "DIFFER")};
}

// ---- 10 --------------------------------------------------------------------

Outcome criterion10() {
  std::size_t checks = 0, clean_bad = 0, identity_bad = 0, mutated = 0, aug_same = 0;
  for (TaskKind task : {TaskKind::kGraphLevel, TaskKind::kNodeLevel}) {
    const SuperNet net = SuperNet::create(net_config(task, 3, 3, 8, 3), 41);
    const GraphBatch b = random_batch(42, task == TaskKind::kGraphLevel ? 5 : 1, 3);
    std::uint64_t before = 1469598103934665603ull;
    net.visit(SuperNet::ConstVisitor([&](ParamGroup, const std::string&, const Tensor& t) { before = mix(before, hash_values(t)); }));
    const Tensor clean = supernet_forward(net, b).z;
    for (ArchAugKind kind : {ArchAugKind::kOpChoice, ArchAugKind::kWeight, ArchAugKind::kEmbed, ArchAugKind::kCompose}) {
      for (std::uint64_t s = 0; s < 10; ++s) {
        ++checks;
        const auto ctx = augment_architecture(net, {kind, 1.1, 0.1, 0.05}, s);
        const Tensor aug = augmented_forward(net, b, ctx).z;
        aug_same += bit_identical(aug.values(), clean.values());
        clean_bad += !bit_identical(supernet_forward(net, b).z.values(), clean.values());
        std::uint64_t after = 1469598103934665603ull;
        net.visit(SuperNet::ConstVisitor([&](ParamGroup, const std::string&, const Tensor& t) { after = mix(after, hash_values(t)); }));
        mutated += after != before;
        const auto id = augment_architecture(net, {kind, 1.0, 0.0, 0.0}, s);
        identity_bad += !bit_identical(augmented_forward(net, b, id).z.values(), clean.values());
      }
    }
  }
  const bool ok = clean_bad == 0 && identity_bad == 0 && mutated == 0;
  return {ok ? Status::kPass : Status::kFail,
          fmt("%zu augmented forwards: clean forward afterwards differs %zu, parameters mutated %zu; r1=1 r2=r3=0 "
              "differs %zu; augmentations that changed the output %zu/%zu",
              checks, clean_bad, mutated, identity_bad, checks - aug_same, checks)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {"gradient correctness", criterion1},   {"oracle equivalence", criterion2},
      {"normalization and bounds", criterion3}, {"parameter sharing", criterion4},
      {"complexity scaling", criterion5},     {"ablation ordering", criterion6},
      {"disentanglement direction", criterion7}, {"MUTAG end-to-end", criterion8},
      {"determinism and resume", criterion9}, {"augmentation safety", criterion10},
  };
  return list;
}

Outcome run_one(std::size_t n) {
  try {
    return criteria()[n - 1].run();
  } catch (const std::exception& e) {
    return {Status::kFail, std::string("error: ") + e.what(), true};
  }
}

const char* label(Status s) { return s == Status::kPass ? "PASS" : s == Status::kFail ? "FAIL" : "SKIP"; }

}  // namespace
}  // namespace dsgas

int main(int argc, char** argv) {
  using namespace dsgas;
  tune_allocator();
  CLI::App app{"Acceptance checks 1-10", "dsgas_acceptance"};
  std::size_t only = 0;
  bool expect_fail = false;
  app.add_option("--criterion", only, "run a single criterion")->check(CLI::Range(1, 10));
  app.add_flag("--expect-fail", expect_fail, "the criterion is a recorded, known failure")->needs("--criterion");
  CLI11_PARSE(app, argc, argv);

  std::vector<std::size_t> which;
  if (only) which = {only};
  else
    for (std::size_t n = 1; n <= criteria().size(); ++n) which.push_back(n);

  int failed = 0, skipped = 0;
  for (std::size_t n : which) {
    const Outcome o = run_one(n);
    std::cout << "criterion " << n << " " << criteria()[n - 1].name << ": " << label(o.status) << " (" << o.detail
              << ")" << std::endl;
    if (expect_fail) {
      const bool as_expected = o.status == Status::kFail && !o.error;
      std::cout << (as_expected ? "known failure, evaluated and reported as FAIL" : "known failure did not fail as recorded")
                << std::endl;
      return as_expected ? 0 : 1;
    }
    failed += o.status == Status::kFail;
    skipped += o.status == Status::kSkip;
  }
  if (failed) return 1;
  return only && skipped ? 77 : 0;
}
