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

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dsgas/trainer.hpp"

namespace dsgas {

const char* to_string(DatasetSource source) {
  switch (source) {
    case DatasetSource::kTuDataset:
      return "tudataset";
    case DatasetSource::kSynthetic:
      return "synthetic";
    case DatasetSource::kNodeFiles:
      return "node_files";
  }
  return "?";
}

DatasetSource dataset_source_from_string(const std::string& s) {
  if (s == "tudataset") return DatasetSource::kTuDataset;
  if (s == "synthetic") return DatasetSource::kSynthetic;
  if (s == "node_files") return DatasetSource::kNodeFiles;
  throw std::invalid_argument("unknown dataset source '" + s + "' (expected tudataset|synthetic|node_files)");
}

const char* to_string(ProbeEmbedding kind) { return kind == ProbeEmbedding::kDiscrete ? "discrete" : "mixed"; }

ProbeEmbedding probe_embedding_from_string(const std::string& s) {
  if (s == "discrete") return ProbeEmbedding::kDiscrete;
  if (s == "mixed") return ProbeEmbedding::kMixed;
  throw std::invalid_argument("unknown probe embedding '" + s + "' (expected discrete|mixed)");
}

SearchConfig SearchConfig::defaults_for(TaskKind task) {
  SearchConfig c;
  c.task = task;
  c.pretext = PretextConfig::defaults_for(task);
  if (task == TaskKind::kNodeLevel) {
    c.factors = 3;
    c.layers = 2;
    c.hidden = 128;
    c.norm = NormKind::kLayer;
    c.dataset.source = DatasetSource::kNodeFiles;
  }
  return c;
}

void SearchConfig::validate() const {
  supernet_config(1).validate();
  pretext.validate();
  aug.validate();
  if (pretext.kind == PretextKind::kGraphContrastive && task != TaskKind::kGraphLevel)
    throw std::invalid_argument("config: graph_contrastive pretext needs task 'graph'");
  if (pretext.kind == PretextKind::kNodeContrastive && task != TaskKind::kNodeLevel)
    throw std::invalid_argument("config: node_contrastive pretext needs task 'node'");
  if (task == TaskKind::kGraphLevel && batch_size < 2)
    throw std::invalid_argument("config: batch_size must be at least 2");
  if (!(lr_w >= 0.0) || !(lr_alpha >= 0.0)) throw std::invalid_argument("config: learning rates must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("config: momentum must be in [0, 1)");
  if (dataset.source == DatasetSource::kNodeFiles && task != TaskKind::kNodeLevel)
    throw std::invalid_argument("config: node_files datasets need task 'node'");
  if (dataset.source != DatasetSource::kNodeFiles && task == TaskKind::kNodeLevel)
    throw std::invalid_argument("config: task 'node' needs a node_files dataset");
}

SuperNetConfig SearchConfig::supernet_config(std::size_t in_dim) const {
  SuperNetConfig s;
  s.task = task;
  s.factors = factors;
  s.layers = layers;
  s.in_dim = in_dim;
  s.hidden = hidden;
  s.norm = norm;
  s.theta_init_std = theta_init_std;
  return s;
}

namespace {

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void emit_view(YAML::Emitter& out, const char* key, const ViewAugSpec& v) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(v.kind);
  out << YAML::Key << "ratio" << YAML::Value << num(v.ratio);
  out << YAML::EndMap;
}

}  // namespace

std::string SearchConfig::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "task" << YAML::Value << (task == TaskKind::kGraphLevel ? "graph" : "node");

  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value << to_string(dataset.source);
  out << YAML::Key << "path" << YAML::Value << dataset.path;
  out << YAML::Key << "name" << YAML::Value << dataset.name;
  out << YAML::Key << "degree_features" << YAML::Value << dataset.degree_features;
  out << YAML::Key << "edges" << YAML::Value << dataset.edges;
  out << YAML::Key << "features" << YAML::Value << dataset.features;
  out << YAML::Key << "labels" << YAML::Value << dataset.labels;
  out << YAML::EndMap;

  const SyntheticSpec& syn = dataset.synthetic;
  out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "num_graphs" << YAML::Value << syn.num_graphs;
  out << YAML::Key << "bridge_prob" << YAML::Value << num(syn.bridge_prob);
  out << YAML::Key << "noise_features" << YAML::Value << syn.noise_features;
  out << YAML::Key << "noise_std" << YAML::Value << num(syn.noise_std);
  if (dataset.synthetic_seed) out << YAML::Key << "seed" << YAML::Value << *dataset.synthetic_seed;
  out << YAML::Key << "factors" << YAML::Value << YAML::BeginSeq;
  for (const FactorSpec& f : syn.factors) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(f.kind);
    out << YAML::Key << "min_nodes" << YAML::Value << f.min_nodes;
    out << YAML::Key << "max_nodes" << YAML::Value << f.max_nodes;
    out << YAML::Key << "community_density" << YAML::Value << num(f.community_density);
    out << YAML::Key << "signal_level" << YAML::Value << num(f.signal_level);
    out << YAML::Key << "signal_noise" << YAML::Value << num(f.signal_noise);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "factors" << YAML::Value << factors;
  out << YAML::Key << "layers" << YAML::Value << layers;
  out << YAML::Key << "hidden" << YAML::Value << hidden;
  out << YAML::Key << "norm" << YAML::Value << to_string(norm);
  out << YAML::Key << "theta_init_std" << YAML::Value << num(theta_init_std);
  out << YAML::EndMap;

  out << YAML::Key << "pretext" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(pretext.kind);
  emit_view(out, "view1", pretext.view1);
  emit_view(out, "view2", pretext.view2);
  out << YAML::Key << "temperature" << YAML::Value << num(pretext.temperature);
  out << YAML::Key << "node_samples" << YAML::Value << pretext.node_samples;
  out << YAML::EndMap;

  out << YAML::Key << "search" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << search_enabled;
  out << YAML::Key << "epochs" << YAML::Value << epochs;
  out << YAML::Key << "batch_size" << YAML::Value << batch_size;
  out << YAML::Key << "lr_w" << YAML::Value << num(lr_w);
  out << YAML::Key << "lr_alpha" << YAML::Value << num(lr_alpha);
  out << YAML::Key << "momentum" << YAML::Value << num(momentum);
  out << YAML::Key << "aug" << YAML::Value << to_string(aug.kind);
  out << YAML::Key << "r1" << YAML::Value << num(aug.r1);
  out << YAML::Key << "r2" << YAML::Value << num(aug.r2);
  out << YAML::Key << "r3" << YAML::Value << num(aug.r3);
  out << YAML::Key << "discrimination" << YAML::Value << to_string(discrimination);
  out << YAML::Key << "detach_posterior" << YAML::Value << detach_posterior;
  out << YAML::EndMap;

  out << YAML::Key << "probe" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "embedding" << YAML::Value << to_string(probe_embedding);
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << output_dir;
  out << YAML::Key << "checkpoint_every" << YAML::Value << checkpoint_every;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t SearchConfig::hash() const {
  SearchConfig c = *this;
  c.epochs = 0;
  c.output_dir.clear();
  c.checkpoint_every = 0;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : c.to_yaml()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

// Reads keys of one mapping and rejects anything unknown.
class Section {
 public:
  // A missing or null node reads as an empty section.
  Section(const YAML::Node& node, std::string name) : name_(std::move(name)) {
    if (node && !node.IsNull()) {
      if (!node.IsMap()) throw std::invalid_argument("config: '" + name_ + "' must be a mapping");
      node_ = node;
    }
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!node_) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      target = v.as<T>();
    } catch (const YAML::Exception&) {
      throw std::invalid_argument("config: bad value for '" + where(key) + "'");
    }
  }

  template <typename E, typename Parse>
  void read_enum(const char* key, E& target, Parse parse) {
    std::string s;
    bool had = false;
    seen_.insert(key);
    if (node_ && node_[key]) {
      read(key, s);
      had = true;
    }
    if (had) target = parse(s);
  }

  YAML::Node child(const char* key) {
    seen_.insert(key);
    if (!node_) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& n = node_;
    return n[key];
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw std::invalid_argument("config: unknown key '" + where(key) + "'");
    }
  }

 private:
  YAML::Node node_{YAML::NodeType::Undefined};
  std::string name_;
  std::set<std::string> seen_;
};

void read_view(Section& parent, const char* key, const std::string& where, ViewAugSpec& spec) {
  Section s(parent.child(key), where);
  s.read_enum("kind", spec.kind, view_aug_from_string);
  s.read("ratio", spec.ratio);
  s.finish();
}

TaskKind parse_task(const std::string& s) {
  if (s == "graph") return TaskKind::kGraphLevel;
  if (s == "node") return TaskKind::kNodeLevel;
  throw std::invalid_argument("config: unknown task '" + s + "' (expected graph|node)");
}

}  // namespace

SearchConfig parse_search_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("config: YAML error: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  Section top(root, "");

  TaskKind task = TaskKind::kGraphLevel;
  top.read_enum("task", task, parse_task);
  SearchConfig c = SearchConfig::defaults_for(task);
  top.read("seed", c.seed);

  {
    Section s(top.child("dataset"), "dataset");
    s.read_enum("source", c.dataset.source, dataset_source_from_string);
    s.read("path", c.dataset.path);
    s.read("name", c.dataset.name);
    s.read("degree_features", c.dataset.degree_features);
    s.read("edges", c.dataset.edges);
    s.read("features", c.dataset.features);
    s.read("labels", c.dataset.labels);
    s.finish();
  }
  {
    SyntheticSpec& syn = c.dataset.synthetic;
    Section s(top.child("synthetic"), "synthetic");
    s.read("num_graphs", syn.num_graphs);
    s.read("bridge_prob", syn.bridge_prob);
    s.read("noise_features", syn.noise_features);
    s.read("noise_std", syn.noise_std);
    if (const YAML::Node seed = s.child("seed")) {
      try {
        c.dataset.synthetic_seed = seed.as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        throw std::invalid_argument("config: bad value for 'synthetic.seed'");
      }
    }
    if (const YAML::Node list = s.child("factors")) {
      if (!list.IsSequence()) throw std::invalid_argument("config: 'synthetic.factors' must be a list");
      syn.factors.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        FactorSpec f;
        Section fs(list[i], "synthetic.factors[" + std::to_string(i) + "]");
        fs.read_enum("kind", f.kind, factor_kind_from_string);
        fs.read("min_nodes", f.min_nodes);
        fs.read("max_nodes", f.max_nodes);
        fs.read("community_density", f.community_density);
        fs.read("signal_level", f.signal_level);
        fs.read("signal_noise", f.signal_noise);
        fs.finish();
        syn.factors.push_back(f);
      }
    }
    s.finish();
  }
  {
    Section s(top.child("model"), "model");
    s.read("factors", c.factors);
    s.read("layers", c.layers);
    s.read("hidden", c.hidden);
    s.read_enum("norm", c.norm, norm_kind_from_string);
    s.read("theta_init_std", c.theta_init_std);
    s.finish();
  }
  {
    Section s(top.child("pretext"), "pretext");
    s.read_enum("kind", c.pretext.kind, pretext_kind_from_string);
    read_view(s, "view1", "pretext.view1", c.pretext.view1);
    read_view(s, "view2", "pretext.view2", c.pretext.view2);
    s.read("temperature", c.pretext.temperature);
    s.read("node_samples", c.pretext.node_samples);
    s.finish();
  }
  {
    Section s(top.child("search"), "search");
    s.read("enabled", c.search_enabled);
    s.read("epochs", c.epochs);
    s.read("batch_size", c.batch_size);
    s.read("lr_w", c.lr_w);
    s.read("lr_alpha", c.lr_alpha);
    s.read("momentum", c.momentum);
    s.read_enum("aug", c.aug.kind, arch_aug_from_string);
    s.read("r1", c.aug.r1);
    s.read("r2", c.aug.r2);
    s.read("r3", c.aug.r3);
    s.read_enum("discrimination", c.discrimination, discrimination_mode_from_string);
    s.read("detach_posterior", c.detach_posterior);
    s.finish();
  }
  {
    Section s(top.child("probe"), "probe");
    s.read_enum("embedding", c.probe_embedding, probe_embedding_from_string);
    s.finish();
  }
  {
    Section s(top.child("output"), "output");
    s.read("dir", c.output_dir);
    s.read("checkpoint_every", c.checkpoint_every);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

void apply_env_overrides(SearchConfig& config) {
  const char* env = std::getenv("DSGAS_SEED");
  if (env == nullptr || *env == '\0') return;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(env, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || env[used] != '\0') throw std::invalid_argument(std::string("DSGAS_SEED is not an integer: ") + env);
  config.seed = v;
}

SearchConfig load_search_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  std::stringstream text;
  text << in.rdbuf();
  SearchConfig c = parse_search_config(text.str());
  const auto base = file.parent_path();
  auto resolve = [&base](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.dataset.path);
  resolve(c.dataset.edges);
  resolve(c.dataset.features);
  resolve(c.dataset.labels);
  resolve(c.output_dir);
  apply_env_overrides(c);
  return c;
}

GraphDataset load_dataset(const SearchConfig& config) {
  switch (config.dataset.source) {
    case DatasetSource::kTuDataset: {
      if (config.dataset.path.empty() || config.dataset.name.empty())
        throw std::invalid_argument("config: tudataset needs dataset.path and dataset.name");
      TuDatasetOptions opts;
      opts.degree_features = config.dataset.degree_features;
      return parse_tudataset(config.dataset.path, config.dataset.name, opts);
    }
    case DatasetSource::kSynthetic: {
      SyntheticSpec spec = config.dataset.synthetic;
      spec.seed = config.dataset.synthetic_seed.value_or(config.seed);
      return make_synthetic_factors(spec);
    }
    case DatasetSource::kNodeFiles:
      if (config.dataset.edges.empty() || config.dataset.features.empty() || config.dataset.labels.empty())
        throw std::invalid_argument("config: node_files needs dataset.edges, dataset.features and dataset.labels");
      return parse_node_dataset(config.dataset.edges, config.dataset.features, config.dataset.labels);
  }
  throw std::logic_error("load_dataset: bad source");
}

}  // namespace dsgas
