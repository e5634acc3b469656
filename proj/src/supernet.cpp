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

#include "dsgas/supernet.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "dsgas/random.hpp"

namespace dsgas {

const char* to_string(NormKind kind) {
  switch (kind) {
    case NormKind::kBatch:
      return "batch";
    case NormKind::kLayer:
      return "layer";
    case NormKind::kNone:
      return "none";
  }
  return "?";
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "batch") return NormKind::kBatch;
  if (s == "layer") return NormKind::kLayer;
  if (s == "none") return NormKind::kNone;
  throw std::invalid_argument("unknown norm kind '" + s + "' (expected batch|layer|none)");
}

void SuperNetConfig::validate() const {
  if (factors == 0) throw std::invalid_argument("supernet: K must be >= 1");
  if (layers == 0) throw std::invalid_argument("supernet: need at least one layer");
  if (in_dim == 0 || hidden == 0) throw std::invalid_argument("supernet: dimensions must be positive");
  if (theta_init_std < 0.0) throw std::invalid_argument("supernet: theta_init_std must be >= 0");
}

namespace {

std::string slot_name(const char* prefix, std::size_t layer) { return prefix + std::to_string(layer); }

Tensor gaussian(std::size_t r, std::size_t c, double std, Rng& rng, bool requires_grad) {
  std::vector<double> v(r * c);
  for (double& x : v) x = std * standard_normal(rng);
  return Tensor::from(r, c, std::move(v), requires_grad);
}

}  // namespace

SuperNet SuperNet::create(const SuperNetConfig& config, std::uint64_t seed) {
  config.validate();
  SuperNet net;
  net.config = config;
  const std::size_t L = config.layers, d = config.hidden, K = config.factors;
  const bool graph_level = config.task == TaskKind::kGraphLevel;

  for (std::size_t l = 0; l < L; ++l)
    net.slots.push_back({slot_name("agg", l), OpCategory::kAgg, l, agg_candidates()});
  if (graph_level) {
    for (std::size_t l = 0; l < L; ++l)
      net.slots.push_back({slot_name("pool", l), OpCategory::kPool, l, pool_candidates()});
    net.slots.push_back({"merge", OpCategory::kMerge, L, merge_candidates()});
  }

  // Weights draw from one stream in a fixed order, so they do not depend on K.
  Rng rng = make_rng(seed, Stream::kInit, 0);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<OpWeights> row;
    for (OpId id : agg_candidates()) row.push_back(init_op_weights(id, l == 0 ? config.in_dim : d, d, rng));
    net.agg.push_back(std::move(row));
    net.norm_gamma.push_back(Tensor::full(1, d, 1.0, true));
    net.norm_beta.push_back(Tensor::zeros(1, d, true));
  }
  if (graph_level) {
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<OpWeights> row;
      for (OpId id : pool_candidates()) row.push_back(init_op_weights(id, d, d, rng));
      net.pool.push_back(std::move(row));
    }
    if (L > 1) net.merge_proj = glorot_uniform(L * d, d, rng);
  }
  net.encoder = glorot_uniform(net.encoding_width(), d, rng);

  Rng arch_rng = make_rng(seed, Stream::kInit, 1);
  for (const auto& slot : net.slots)
    net.theta.push_back(gaussian(K, slot.candidates.size(), config.theta_init_std, arch_rng, true));
  Rng proto_rng = make_rng(seed, Stream::kInit, 2);
  net.prototypes = gaussian(K, 2 * d, 1.0, proto_rng, true);
  return net;
}

std::size_t SuperNet::encoding_width() const {
  std::size_t s = 0;
  for (const auto& slot : slots) s += slot.candidates.size();
  return s;
}

void SuperNet::visit(const Visitor& fn) {
  for (std::size_t l = 0; l < agg.size(); ++l) {
    for (auto& op : agg[l])
      for (auto& t : op.tensors) fn(ParamGroup::kWeight, slot_name("agg", l) + "." + std::string(op_name(op.id)) + "." + t.name, t.value);
    fn(ParamGroup::kWeight, slot_name("norm", l) + ".gamma", norm_gamma[l]);
    fn(ParamGroup::kWeight, slot_name("norm", l) + ".beta", norm_beta[l]);
  }
  for (std::size_t l = 0; l < pool.size(); ++l)
    for (auto& op : pool[l])
      for (auto& t : op.tensors)
        fn(ParamGroup::kWeight, slot_name("pool", l) + "." + std::string(op_name(op.id)) + "." + t.name, t.value);
  if (merge_proj.defined()) fn(ParamGroup::kWeight, "merge.ConcatMerge.proj", merge_proj);
  for (std::size_t s = 0; s < theta.size(); ++s) fn(ParamGroup::kArch, "theta." + slots[s].name, theta[s]);
  fn(ParamGroup::kPrototype, "prototypes", prototypes);
  fn(ParamGroup::kEncoder, "encoder", encoder);
}

void SuperNet::visit(const ConstVisitor& fn) const {
  const_cast<SuperNet*>(this)->visit(
      Visitor([&](ParamGroup g, const std::string& name, Tensor& t) { fn(g, name, t); }));
}

std::vector<Tensor> SuperNet::parameters(ParamGroup group) const {
  std::vector<Tensor> out;
  visit(ConstVisitor([&](ParamGroup g, const std::string&, const Tensor& t) {
    if (g == group) out.push_back(t);
  }));
  return out;
}

std::size_t SuperNet::parameter_count(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& t : parameters(group)) n += t.size();
  return n;
}

Tensor mixed_alpha(const Tensor& theta, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("mixed_alpha: temperature must be > 0");
  return softmax_rows(theta, temperature);
}

Tensor candidate_forward(const SuperNet& net, std::size_t slot, std::size_t index, const std::vector<Tensor>& inputs,
                         const GraphBatch& batch) {
  const SlotInfo& info = net.slots.at(slot);
  const OpId id = info.candidates.at(index);
  switch (info.category) {
    case OpCategory::kAgg:
      return apply_agg(id, inputs.at(0), batch.views, net.agg.at(info.layer).at(index));
    case OpCategory::kPool:
      return apply_pool(id, inputs.at(0), batch.segments, net.pool.at(info.layer).at(index));
    case OpCategory::kMerge: {
      Tensor merged = apply_merge(id, inputs);
      if (id == OpId::kConcatMerge && inputs.size() > 1) merged = matmul(merged, net.merge_proj);
      return merged;
    }
  }
  throw std::logic_error("candidate_forward: bad category");
}

namespace {

// Combines candidate outputs with alpha row k. Outputs are computed lazily so
// zero-weight candidates (one-hot architectures) cost nothing.
class CandidateCache {
 public:
  CandidateCache(const SuperNet& net, std::size_t slot, std::vector<Tensor> inputs, const GraphBatch& batch)
      : net_(net), slot_(slot), inputs_(std::move(inputs)), batch_(batch),
        outputs_(net.slots.at(slot).candidates.size()) {}

  const Tensor& get(std::size_t i) {
    if (!outputs_[i]) outputs_[i] = candidate_forward(net_, slot_, i, inputs_, batch_);
    return *outputs_[i];
  }

  Tensor mix(const Tensor& alpha, std::size_t k) {
    if (alpha.rows() <= k || alpha.cols() != outputs_.size())
      throw std::invalid_argument("mixed_op_forward: alpha shape does not match slot " + net_.slots[slot_].name);
    Tensor acc;
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      if (alpha(k, i) == 0.0 && !alpha.requires_grad()) continue;
      Tensor term = scale_by(get(i), element(alpha, k, i));
      acc = acc.defined() ? add(acc, term) : term;
    }
    if (!acc.defined()) throw std::invalid_argument("mixed_op_forward: alpha row is all zero");
    return acc;
  }

 private:
  const SuperNet& net_;
  std::size_t slot_;
  std::vector<Tensor> inputs_;
  const GraphBatch& batch_;
  std::vector<std::optional<Tensor>> outputs_;
};

Tensor one_hot_alpha(const Architecture& arch, std::size_t slot) {
  const std::size_t K = arch.factors(), n = arch.slots.at(slot).candidates.size();
  Tensor a = Tensor::zeros(K, n);
  for (std::size_t k = 0; k < K; ++k) a.mutable_values()[k * n + arch.choice[slot][k]] = 1.0;
  return a;
}

class DropoutMasks {
 public:
  DropoutMasks(double rate, std::uint64_t seed) : rate_(rate), rng_(make_rng(seed, Stream::kArchAug, 1)) {}

  Tensor apply(const Tensor& x) {
    if (rate_ <= 0.0) return x;
    std::vector<double> mask(x.size());
    for (double& m : mask) m = uniform01(rng_) < rate_ ? 0.0 : 1.0;
    return mul(x, Tensor::from(x.rows(), x.cols(), std::move(mask)));
  }

 private:
  double rate_;
  Rng rng_;
};

Tensor normalize(const SuperNet& net, std::size_t layer, const Tensor& h) {
  switch (net.config.norm) {
    case NormKind::kBatch:
      return add_row(mul_row(normalize_cols(h), net.norm_gamma[layer]), net.norm_beta[layer]);
    case NormKind::kLayer:
      return add_row(mul_row(normalize_rows(h), net.norm_gamma[layer]), net.norm_beta[layer]);
    case NormKind::kNone:
      return h;
  }
  return h;
}

}  // namespace

Tensor mixed_op_forward(const SuperNet& net, std::size_t slot, const Tensor& alpha, std::size_t k,
                        const std::vector<Tensor>& inputs, const GraphBatch& batch) {
  CandidateCache cache(net, slot, inputs, batch);
  return cache.mix(alpha, k);
}

ForwardResult supernet_forward(const SuperNet& net, const GraphBatch& batch, const ForwardOptions& options) {
  const SuperNetConfig& cfg = net.config;
  const std::size_t K = cfg.factors, L = cfg.layers;
  if (batch.features.cols() != cfg.in_dim)
    throw std::invalid_argument("supernet_forward: batch has " + std::to_string(batch.features.cols()) +
                                " features, supernet expects " + std::to_string(cfg.in_dim));
  if (cfg.task == TaskKind::kNodeLevel && batch.num_graphs != 1)
    throw std::invalid_argument("supernet_forward: node-level supernet expects a single graph");
  if (options.architecture && options.architecture->factors() != K)
    throw std::invalid_argument("supernet_forward: architecture factor count differs from K");

  ForwardResult out;
  for (std::size_t s = 0; s < net.slots.size(); ++s)
    out.alphas.push_back(options.architecture ? one_hot_alpha(*options.architecture, s)
                                              : mixed_alpha(net.theta[s], options.temperature));
  DropoutMasks dropout(options.embed_dropout, options.dropout_seed);

  // hidden[k] is factor k's current node representation
  std::vector<Tensor> hidden(K);
  std::vector<std::vector<Tensor>> layer_out(K);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t slot = l;
    std::optional<CandidateCache> shared;
    if (l == 0) shared.emplace(net, slot, std::vector<Tensor>{batch.features}, batch);
    for (std::size_t k = 0; k < K; ++k) {
      Tensor mixed = l == 0 ? shared->mix(out.alphas[slot], k)
                            : mixed_op_forward(net, slot, out.alphas[slot], k, {hidden[k]}, batch);
      hidden[k] = normalize(net, l, relu(dropout.apply(mixed)));
      layer_out[k].push_back(hidden[k]);
    }
  }

  if (cfg.task == TaskKind::kNodeLevel) {
    out.factors = hidden;
  } else {
    const std::size_t merge_slot = 2 * L;
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<Tensor> pooled;
      for (std::size_t l = 0; l < L; ++l)
        pooled.push_back(dropout.apply(mixed_op_forward(net, L + l, out.alphas[L + l], k, {layer_out[k][l]}, batch)));
      out.factors.push_back(dropout.apply(mixed_op_forward(net, merge_slot, out.alphas[merge_slot], k, pooled, batch)));
    }
  }
  out.z = K == 1 ? out.factors.front() : concat_cols(out.factors);
  return out;
}

Tensor encode_arch(const std::vector<Tensor>& alphas, const Tensor& encoder) {
  if (alphas.empty()) throw std::invalid_argument("encode_arch: no slots");
  Tensor flat = alphas.size() == 1 ? alphas.front() : concat_cols(alphas);
  return matmul(flat, encoder);
}

Architecture discretize(const SuperNet& net) {
  Architecture arch;
  arch.slots = net.slots;
  for (const auto& th : net.theta) {
    std::vector<std::size_t> pick(th.rows());
    for (std::size_t k = 0; k < th.rows(); ++k) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < th.cols(); ++i)
        if (th(k, i) > th(k, best)) best = i;
      pick[k] = best;
    }
    arch.choice.push_back(std::move(pick));
  }
  return arch;
}

double mean_alpha_cosine(const SuperNet& net) {
  const std::size_t K = net.factors();
  if (K < 2) return 1.0;
  std::vector<std::vector<double>> flat(K);
  for (const auto& th : net.theta) {
    Tensor a = mixed_alpha(th.detach());
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < a.cols(); ++i) flat[k].push_back(a(k, i));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a + 1; b < K; ++b) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < flat[a].size(); ++i) {
        dot += flat[a][i] * flat[b][i];
        na += flat[a][i] * flat[a][i];
        nb += flat[b][i] * flat[b][i];
      }
      total += dot / std::sqrt(na * nb);
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

}  // namespace dsgas
