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

#include "dsgas/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dsgas/disentangle.hpp"
#include "dsgas/random.hpp"

namespace dsgas {

std::vector<Tensor> TrainState::weight_params() const {
  std::vector<Tensor> out = net.parameters(ParamGroup::kWeight);
  out.push_back(net.prototypes);
  out.push_back(net.encoder);
  for (const Tensor& t : head.parameters()) out.push_back(t);
  return out;
}

std::vector<std::string> TrainState::weight_param_names() const {
  std::vector<std::string> out;
  net.visit(SuperNet::ConstVisitor([&](ParamGroup g, const std::string& name, const Tensor&) {
    if (g == ParamGroup::kWeight) out.push_back(name);
  }));
  out.push_back("prototypes");
  out.push_back("encoder");
  for (const char* n : {"head.w1", "head.b1", "head.w2", "head.b2"}) out.push_back(n);
  return out;
}

TrainState init_train_state(const SearchConfig& config, std::size_t in_dim) {
  config.validate();
  TrainState s;
  s.in_dim = in_dim;
  s.net = SuperNet::create(config.supernet_config(in_dim), config.seed);
  Rng head_rng = make_rng(config.seed, Stream::kInit, 3);
  s.head = ProjectionHead::create(config.hidden, head_rng);
  s.adam = Adam({.lr = config.lr_w});
  s.sgd = Sgd({.lr = config.lr_alpha, .momentum = config.momentum});
  s.alpha_cosine.push_back(mean_alpha_cosine(s.net));
  return s;
}

std::vector<std::size_t> epoch_instances(const SearchConfig& config, const GraphDataset& dataset,
                                         std::size_t epoch) {
  Rng rng = make_rng(config.seed, Stream::kBatch, epoch);
  if (config.task == TaskKind::kNodeLevel) {
    if (dataset.graphs.size() != 1) throw std::invalid_argument("node task expects a single-graph dataset");
    return sample_nodes(dataset.graphs.front().num_nodes(), config.pretext.node_samples, rng);
  }
  std::vector<std::size_t> idx(dataset.graphs.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > config.batch_size) {
    shuffle(idx, rng);
    idx.resize(config.batch_size);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

namespace {

// Temporarily switches gradient tracking on a set of leaves.
class GradScope {
 public:
  GradScope(std::vector<Tensor> tensors, bool on) : tensors_(std::move(tensors)) {
    for (Tensor& t : tensors_) {
      saved_.push_back(t.requires_grad());
      t.set_requires_grad(on);
    }
  }
  ~GradScope() {
    for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].set_requires_grad(saved_[i]);
  }
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;

 private:
  std::vector<Tensor> tensors_;
  std::vector<bool> saved_;
};

struct EpochData {
  std::vector<const Graph*> graphs;
  GraphBatch batch;
  std::vector<std::size_t> nodes;  // node task: contrastive instances
  bool node_task = false;
};

EpochData epoch_data(const SearchConfig& config, const GraphDataset& dataset, std::size_t epoch) {
  EpochData d;
  d.node_task = config.task == TaskKind::kNodeLevel;
  const auto idx = epoch_instances(config, dataset, epoch);
  if (d.node_task) {
    d.graphs = {&dataset.graphs.front()};
    d.nodes = idx;
  } else {
    for (std::size_t i : idx) d.graphs.push_back(&dataset.graphs[i]);
  }
  d.batch = batch_graphs(d.graphs);
  return d;
}

std::vector<Tensor> instances(const EpochData& d, const std::vector<Tensor>& factors) {
  if (!d.node_task) return factors;
  std::vector<Tensor> out;
  for (const Tensor& f : factors) out.push_back(gather_rows(f, d.nodes));
  return out;
}

void zero_grads(std::vector<Tensor> tensors) {
  for (Tensor& t : tensors) t.zero_grad();
}

[[noreturn]] void non_finite(const char* step, std::size_t epoch, double value) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "search aborted: %s loss is %g at epoch %zu", step, value, epoch + 1);
  throw std::runtime_error(buf);
}

}  // namespace

StepOutput weight_step(TrainState& state, const SearchConfig& config, const GraphDataset& dataset,
                       std::size_t epoch) {
  SuperNet& net = state.net;
  GradScope freeze_theta(net.theta, false);
  const EpochData d = epoch_data(config, dataset, epoch);
  const auto views = make_view_batches(d.graphs, config.pretext.view1, config.pretext.view2,
                                       derive_seed(config.seed, Stream::kViews, epoch));

  Tape tape;
  const ForwardResult v1 = supernet_forward(net, views.first);
  const ForwardResult v2 = supernet_forward(net, views.second);
  const ForwardResult clean = supernet_forward(net, d.batch);

  const Tensor losses = per_factor_losses(instances(d, v1.factors), instances(d, v2.factors), state.head,
                                          config.pretext.temperature);
  std::vector<Tensor> z = instances(d, clean.factors);
  if (config.detach_posterior)
    for (Tensor& t : z) t = t.detach();
  const Tensor posterior = infer_factor_probs(z, encode_arch(clean.alphas, net.encoder), net.prototypes);

  Tensor loss;
  try {
    loss = factor_weighted_loss(posterior, losses);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("search aborted at epoch " + std::to_string(epoch + 1) + ", weight step: " + e.what());
  }
  if (!std::isfinite(loss.item())) non_finite("weight step", epoch, loss.item());

  tape.backward(loss);
  std::vector<Tensor> params = state.weight_params();
  update_weights(params, state.adam);
  zero_grads(params);
  zero_grads(net.theta);
  return {loss.item(), posterior.detach()};
}

StepOutput arch_step(TrainState& state, const SearchConfig& config, const GraphDataset& dataset, std::size_t epoch,
                     bool apply) {
  SuperNet& net = state.net;
  GradScope freeze_weights(state.weight_params(), false);
  const EpochData d = epoch_data(config, dataset, epoch);
  const AugmentedForwardCtx ctx =
      augment_architecture(net, config.aug, derive_seed(config.seed, Stream::kArchAug, epoch));

  std::optional<Tape> tape;
  std::optional<NoGradGuard> no_grad;
  if (apply)
    tape.emplace();
  else
    no_grad.emplace();

  const ForwardResult clean = supernet_forward(net, d.batch);
  const ForwardResult aug = augmented_forward(net, d.batch, ctx);
  const Tensor probs =
      arch_discrimination_probs(instances(d, clean.factors), instances(d, aug.factors), config.discrimination);
  const Tensor loss = scale(contrastive_search_loss(probs), 1.0 / static_cast<double>(probs.rows()));
  if (!std::isfinite(loss.item())) non_finite("architecture step", epoch, loss.item());

  if (apply) {
    tape->backward(loss);
    update_alpha(net.theta, state.sgd);
    zero_grads(net.theta);
  }
  return {loss.item(), {}};
}

Tensor embed_dataset(const SuperNet& net, const GraphDataset& dataset, ProbeEmbedding kind) {
  NoGradGuard no_grad;
  ForwardOptions opts;
  Architecture arch;
  if (kind == ProbeEmbedding::kDiscrete) {
    arch = discretize(net);
    opts.architecture = &arch;
  }
  // One batch: batch normalization statistics then cover the whole dataset.
  return supernet_forward(net, batch_graphs(dataset.graphs), opts).z.detach();
}

namespace {

std::vector<int> probe_labels(const GraphDataset& dataset) {
  if (dataset.task == TaskKind::kNodeLevel) return dataset.graphs.front().node_labels;
  return dataset.labels();
}

void write_embeddings(const std::filesystem::path& file, const Tensor& z, const std::vector<int>& labels) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  char buf[32];
  for (std::size_t i = 0; i < z.rows(); ++i) {
    out << (i < labels.size() ? labels[i] : -1);
    for (std::size_t j = 0; j < z.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", z(i, j));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace

SearchResult run_unsupervised_search(const SearchConfig& config, const GraphDataset& dataset,
                                     const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  config.validate();
  if (dataset.graphs.empty()) throw std::invalid_argument("search: empty dataset");
  if (dataset.task != config.task)
    throw std::invalid_argument(std::string("search: config task does not match the dataset (") +
                                to_string(dataset.task) + ")");

  TrainState state;
  if (!options.resume_from.empty()) {
    Checkpoint ck = load_checkpoint(options.resume_from);
    if (ck.config_hash != config.hash())
      throw std::invalid_argument("search: checkpoint " + options.resume_from.string() +
                                  " was written under a different config");
    if (ck.state.in_dim != dataset.num_features)
      throw std::invalid_argument("search: checkpoint feature width does not match the dataset");
    state = std::move(ck.state);
  } else {
    state = init_train_state(config, dataset.num_features);
  }

  const bool write = !config.output_dir.empty();
  const std::filesystem::path dir = config.output_dir;
  std::ofstream metrics;
  if (write) {
    std::filesystem::create_directories(dir);
    const auto file = dir / "metrics.csv";
    const bool fresh = options.resume_from.empty() || !std::filesystem::exists(file);
    metrics.open(file, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw std::runtime_error("cannot write " + file.string());
    if (fresh) metrics << "epoch,loss_w,loss_alpha,wallclock_ms\n";
  }

  SearchResult result;
  std::size_t ran = 0;
  for (std::size_t epoch = state.epoch; epoch < config.epochs; ++epoch) {
    if (options.stop_after && ran == *options.stop_after) break;
    const auto t0 = Clock::now();
    const StepOutput w = weight_step(state, config, dataset, epoch);
    const StepOutput a = arch_step(state, config, dataset, epoch, config.search_enabled);
    result.posterior = w.posterior;
    state.epoch = epoch + 1;
    state.loss_w.push_back(w.loss);
    state.loss_alpha.push_back(a.loss);
    state.alpha_cosine.push_back(mean_alpha_cosine(state.net));
    ++ran;

    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (write) {
      char row[128];
      std::snprintf(row, sizeof row, "%zu,%.17g,%.17g,%.3f\n", state.epoch, w.loss, a.loss, ms);
      metrics << row << std::flush;
      if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0)
        save_checkpoint(dir / ("checkpoint_epoch" + std::to_string(state.epoch) + ".dsgs"), config, state);
    }
    if (options.on_epoch) options.on_epoch(state.epoch, w.loss, a.loss);
  }

  result.architecture = discretize(state.net);
  result.loss_w = state.loss_w;
  result.loss_alpha = state.loss_alpha;
  result.alpha_cosine = state.alpha_cosine;
  result.embeddings = embed_dataset(state.net, dataset, config.probe_embedding);
  result.labels = probe_labels(dataset);
  if (write) {
    result.checkpoint_path = (dir / "checkpoint.dsgs").string();
    save_checkpoint(result.checkpoint_path, config, state);
    write_embeddings(dir / "embeddings.csv", result.embeddings, result.labels);
  }
  result.state = std::move(state);
  result.wallclock_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return result;
}

SearchResult run_unsupervised_search(const SearchConfig& config) {
  return run_unsupervised_search(config, load_dataset(config));
}

}  // namespace dsgas
