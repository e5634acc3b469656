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

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dsgas/evalcli.hpp"
#include "dsgas/trainer.hpp"

namespace dsgas {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void print_architecture(const Architecture& arch, std::ostream& out) {
  for (std::size_t k = 0; k < arch.factors(); ++k) {
    out << "factor " << k << ":";
    for (std::size_t s = 0; s < arch.slots.size(); ++s) out << ' ' << arch.slots[s].name << '=' << op_name(arch.op(s, k));
    out << '\n';
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

int run_search(const std::string& config_file, const std::string& resume, std::ostream& out) {
  const SearchConfig config = load_search_config(config_file);
  const GraphDataset dataset = load_dataset(config);
  RunOptions opts;
  opts.resume_from = resume;
  const SearchResult r = run_unsupervised_search(config, dataset, opts);
  out << "dataset " << dataset.name << ": " << dataset.graphs.size() << " graphs, " << dataset.num_features
      << " features, " << dataset.num_classes << " classes\n";
  if (!r.loss_w.empty())
    out << "epochs " << r.loss_w.size() << ", final L_w " << fmt("%.6f", r.loss_w.back()) << ", final L_alpha "
        << fmt("%.6f", r.loss_alpha.back()) << '\n';
  print_architecture(r.architecture, out);
  if (!r.checkpoint_path.empty()) {
    const std::string dot = (std::filesystem::path(config.output_dir) / "architecture.dot").string();
    write_text(dot, export_dot(r.architecture));
    out << "checkpoint " << r.checkpoint_path << '\n';
  }
  out << "wall-clock " << fmt("%.1f", r.wallclock_ms / 1000.0) << " s\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& protocol_name, std::uint64_t seed,
             const std::string& embedding, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const GraphDataset dataset = load_dataset(ck.config);
  ProbeKind kind = ck.config.task == TaskKind::kGraphLevel ? ProbeKind::kGraphFolds : ProbeKind::kNodeSplits;
  if (!protocol_name.empty()) kind = probe_kind_from_string(protocol_name);
  ProbeProtocol protocol = ProbeProtocol::defaults_for(kind);
  protocol.seed = seed;
  const ProbeEmbedding emb =
      embedding.empty() ? ck.config.probe_embedding : probe_embedding_from_string(embedding);
  const Tensor z = embed_dataset(ck.state.net, dataset, emb);
  const std::vector<int> labels =
      dataset.task == TaskKind::kNodeLevel ? dataset.graphs.front().node_labels : dataset.labels();
  const ProbeReport report = linear_probe(z, labels, protocol);
  out << "probe " << to_string(kind) << " on " << dataset.name << " (" << z.rows() << " x " << z.cols()
      << " embeddings, epoch " << ck.state.epoch << "): " << fmt("%.4f", report.mean) << " ± "
      << fmt("%.4f", report.std) << " over " << report.per_fold.size() << " folds\n";
  return 0;
}

int run_export(const std::string& checkpoint, const std::string& dot_file, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  write_text(dot_file, export_dot(discretize(ck.state.net)));
  out << "wrote " << dot_file << '\n';
  return 0;
}

int run_gradcheck(std::size_t seeds, std::ostream& out) {
  const GradcheckSuiteResult r = run_gradcheck_suite(seeds);
  const bool ok = r.max_rel_error < 1e-4;
  out << "gradcheck: " << r.seeds << " seeds, " << r.coordinates << " coordinates (" << r.retried
      << " re-measured at a smaller step), max rel. error "
      << fmt("%.3e", r.max_rel_error) << " (" << r.worst << ") " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

int run_synth(const std::string& spec_file, const std::string& out_dir, std::ostream& out) {
  const SearchConfig config = load_search_config(spec_file);
  SyntheticSpec spec = config.dataset.synthetic;
  spec.seed = config.dataset.synthetic_seed.value_or(config.seed);
  const GraphDataset ds = make_synthetic_factors(spec);
  const std::string name = config.dataset.name.empty() ? "SYNTH" : config.dataset.name;
  write_tudataset(ds, out_dir, name);
  out << "wrote " << ds.graphs.size() << " graphs (" << ds.num_classes << " classes, " << ds.num_features
      << " features) to " << out_dir << '/' << name << "_*.txt\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Disentangled self-supervised graph architecture search", "dsgas"};
  app.require_subcommand(1);

  std::string config_file, resume, checkpoint, protocol, embedding, dot_file, spec_file, out_dir;
  std::uint64_t probe_seed = 0;
  std::size_t seeds = 10;

  CLI::App* search = app.add_subcommand("search", "run the unsupervised architecture search");
  search->add_option("--config", config_file, "YAML run config")->required()->check(CLI::ExistingFile);
  search->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "linear probe on frozen embeddings of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--protocol", protocol, "logreg_10fold_graph | logreg_splits_node (default: by task)");
  eval->add_option("--seed", probe_seed, "probe protocol seed");
  eval->add_option("--embedding", embedding, "discrete | mixed (default: from the run config)");

  CLI::App* exp = app.add_subcommand("export", "write the discretized architecture as Graphviz DOT");
  exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", dot_file, "output .dot file")->required();

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of both search losses");
  grad->add_option("--seeds", seeds, "number of random instances")->check(CLI::PositiveNumber);

  CLI::App* synth = app.add_subcommand("synth", "write a planted-factor dataset in TU layout");
  synth->add_option("--spec", spec_file, "YAML config with a synthetic section")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (search->parsed()) return run_search(config_file, resume, out);
    if (eval->parsed()) return run_eval(checkpoint, protocol, probe_seed, embedding, out);
    if (exp->parsed()) return run_export(checkpoint, dot_file, out);
    if (grad->parsed()) return run_gradcheck(seeds, out);
    if (synth->parsed()) return run_synth(spec_file, out_dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace dsgas
