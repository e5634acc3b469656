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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dsgas/archsearch.hpp"
#include "dsgas/graph.hpp"
#include "dsgas/optim.hpp"
#include "dsgas/pretext.hpp"
#include "dsgas/supernet.hpp"

namespace dsgas {

enum class DatasetSource { kTuDataset, kSynthetic, kNodeFiles };

/// Config names: tudataset | synthetic | node_files.
const char* to_string(DatasetSource source);
DatasetSource dataset_source_from_string(const std::string& s);

struct DatasetConfig {
  DatasetSource source = DatasetSource::kSynthetic;
  std::string path;  // TU directory
  std::string name;  // TU file prefix, e.g. MUTAG
  bool degree_features = false;
  std::string edges, features, labels;  // node_files
  SyntheticSpec synthetic = SyntheticSpec::planted_default();
  /// Seed of the synthetic generator; the run seed when unset.
  std::optional<std::uint64_t> synthetic_seed;
};

/// Which embeddings the probe sees after search.
enum class ProbeEmbedding {
  kDiscrete,  // forward of the discretized architecture
  kMixed,     // forward of the continuous super-network
};

const char* to_string(ProbeEmbedding kind);
ProbeEmbedding probe_embedding_from_string(const std::string& s);

struct SearchConfig {
  std::uint64_t seed = 0;
  TaskKind task = TaskKind::kGraphLevel;
  DatasetConfig dataset;

  std::size_t factors = 4;  // K
  std::size_t layers = 3;
  std::size_t hidden = 32;  // d
  NormKind norm = NormKind::kBatch;
  double theta_init_std = 1e-3;

  PretextConfig pretext;

  bool search_enabled = true;  // false freezes theta at its initialization
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr_w = 1e-3;
  double lr_alpha = 1e-2;
  double momentum = 0.0;
  ArchAugSpec aug;
  DiscriminationMode discrimination = DiscriminationMode::kAcrossFactors;
  bool detach_posterior = false;

  ProbeEmbedding probe_embedding = ProbeEmbedding::kMixed;

  std::string output_dir;  // empty: nothing is written
  std::size_t checkpoint_every = 50;  // 0: final checkpoint only

  /// Graph tasks: K=4, L=3, d=32, batch norm. Node tasks: K=3, L=2, d=128,
  /// layer norm.
  static SearchConfig defaults_for(TaskKind task);
  void validate() const;
  SuperNetConfig supernet_config(std::size_t in_dim) const;

  std::string to_yaml() const;
  /// Hash of everything that shapes the trajectory. Epoch count and output
  /// settings are excluded so a run can be resumed with a longer schedule.
  std::uint64_t hash() const;
};

/// Parses the YAML schema documented in the README. Task defaults are applied
/// first, then every key present overrides them. Unknown keys are errors.
SearchConfig parse_search_config(const std::string& yaml_text);

/// Reads a config file, resolves relative dataset paths against its
/// directory and applies the DSGAS_SEED environment override.
SearchConfig load_search_config(const std::filesystem::path& file);

void apply_env_overrides(SearchConfig& config);

GraphDataset load_dataset(const SearchConfig& config);

/// Everything that evolves during search.
struct TrainState {
  SuperNet net;
  ProjectionHead head;
  Adam adam;  // weights, prototypes, encoder map and head
  Sgd sgd;    // theta
  std::size_t epoch = 0;  // completed epochs
  std::vector<double> loss_w, loss_alpha;
  std::vector<double> alpha_cosine;  // entry 0 is the initialization
  std::uint64_t in_dim = 0;

  /// Parameters stepped by Adam, in a fixed order.
  std::vector<Tensor> weight_params() const;
  std::vector<std::string> weight_param_names() const;
};

TrainState init_train_state(const SearchConfig& config, std::size_t in_dim);

/// Graphs (graph task) or nodes (node task) used by `epoch`.
std::vector<std::size_t> epoch_instances(const SearchConfig& config, const GraphDataset& dataset, std::size_t epoch);

struct StepOutput {
  double loss = 0.0;
  Tensor posterior;  // weight step only, instances x K
};

/// Step (a): factor-routed pretext loss, one Adam step on the weights,
/// prototypes, encoder map and head. Theta is not touched.
StepOutput weight_step(TrainState& state, const SearchConfig& config, const GraphDataset& dataset, std::size_t epoch);

/// Step (b): contrastive search loss under a fresh architecture augmentation,
/// averaged over instances, one SGD step on theta. With `apply` false the
/// loss is only evaluated.
StepOutput arch_step(TrainState& state, const SearchConfig& config, const GraphDataset& dataset, std::size_t epoch,
                     bool apply = true);

/// Frozen embeddings of every graph (graph task) or node (node task),
/// instances x K d. No tape is recorded.
Tensor embed_dataset(const SuperNet& net, const GraphDataset& dataset, ProbeEmbedding kind);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "DSGS", u32 version, u64 config hash, u32 blob count, then per blob:
/// u32 name length, name, u32 rank, u64 dims, little-endian f64 data. The
/// config text rides along as the blob "meta.config" (one byte per value).
void save_checkpoint(const std::filesystem::path& file, const SearchConfig& config, const TrainState& state);

struct Checkpoint {
  SearchConfig config;
  std::uint64_t config_hash = 0;
  TrainState state;
};

Checkpoint load_checkpoint(const std::filesystem::path& file);

struct SearchResult {
  Architecture architecture;
  std::string checkpoint_path;  // empty when output_dir is unset
  std::vector<double> loss_w, loss_alpha;
  std::vector<double> alpha_cosine;
  Tensor posterior;   // last weight step
  Tensor embeddings;  // probe input, instances x K d
  std::vector<int> labels;
  double wallclock_ms = 0.0;
  TrainState state;
};

struct RunOptions {
  std::filesystem::path resume_from;  // empty: fresh start
  /// Stop after this many epochs in this invocation (simulated interruption).
  std::optional<std::size_t> stop_after;
  std::function<void(std::size_t epoch, double loss_w, double loss_alpha)> on_epoch;
};

SearchResult run_unsupervised_search(const SearchConfig& config, const GraphDataset& dataset,
                                     const RunOptions& options = {});
SearchResult run_unsupervised_search(const SearchConfig& config);

}  // namespace dsgas
