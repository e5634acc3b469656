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

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dsgas/evalcli.hpp"
#include "dsgas/trainer.hpp"
#include "test_util.hpp"

namespace dsgas {
namespace {

namespace fs = std::filesystem;

// Two Gaussian blobs per class centre, rows x 2.
Tensor blobs(const std::vector<std::pair<double, double>>& centres, std::size_t per_class, double spread,
             std::vector<int>& labels, Rng& rng) {
  std::vector<double> v;
  labels.clear();
  for (std::size_t c = 0; c < centres.size(); ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      v.push_back(centres[c].first + spread * standard_normal(rng));
      v.push_back(centres[c].second + spread * standard_normal(rng));
      labels.push_back(static_cast<int>(c));
    }
  return Tensor::from(labels.size(), 2, std::move(v));
}

// ---- a small DOT reader, independent of the exporter ----------------------

struct DotGraph {
  std::set<std::string> nodes;
  std::map<std::string, std::map<std::string, std::string>> node_attrs;
  struct Edge {
    std::string from, to;
    std::map<std::string, std::string> attrs;
  };
  std::vector<Edge> edges;
};

class DotReader {
 public:
  explicit DotReader(std::string text) : s_(std::move(text)) {}

  // graph := "digraph" ID? "{" stmt* "}"
  DotGraph parse() {
    expect_word("digraph");
    skip();
    if (peek() != '{') id();
    expect('{');
    DotGraph g;
    while (true) {
      skip();
      if (peek() == '}') break;
      statement(g);
    }
    expect('}');
    skip();
    if (i_ != s_.size()) throw std::runtime_error("trailing input");
    return g;
  }

 private:
  // stmt := ID "=" ID | ("node"|"edge"|"graph") attrs | ID attrs? | ID "->" ID attrs? ; ";"?
  void statement(DotGraph& g) {
    const bool quoted = (skip(), peek() == '"');
    const std::string a = id();
    skip();
    if (peek() == '=') {
      ++i_;
      id();
    } else if (!quoted && (a == "node" || a == "edge" || a == "graph")) {
      attrs();
    } else if (s_.compare(i_, 2, "->") == 0) {
      i_ += 2;
      const std::string b = id();
      skip();
      DotGraph::Edge e{a, b, peek() == '[' ? attrs() : std::map<std::string, std::string>{}};
      g.nodes.insert(a);
      g.nodes.insert(b);
      g.edges.push_back(std::move(e));
    } else {
      g.nodes.insert(a);
      if (peek() == '[') g.node_attrs[a] = attrs();
    }
    skip();
    if (peek() == ';') ++i_;
  }

  std::map<std::string, std::string> attrs() {
    std::map<std::string, std::string> out;
    expect('[');
    while (true) {
      skip();
      if (peek() == ']') break;
      const std::string k = id();
      expect('=');
      out[k] = id();
      skip();
      if (peek() == ',' || peek() == ';') ++i_;
    }
    expect(']');
    return out;
  }

  std::string id() {
    skip();
    std::string out;
    if (peek() == '"') {
      ++i_;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\') ++i_;
        out += s_[i_++];
      }
      expect('"');
      return out;
    }
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '.'))
      out += s_[i_++];
    if (out.empty()) throw std::runtime_error("expected identifier at " + std::to_string(i_));
    return out;
  }

  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void expect(char c) {
    skip();
    if (peek() != c) throw std::runtime_error(std::string("expected '") + c + "' at " + std::to_string(i_));
    ++i_;
  }
  void expect_word(const std::string& w) {
    skip();
    if (s_.compare(i_, w.size(), w) != 0) throw std::runtime_error("expected " + w);
    i_ += w.size();
  }

  std::string s_;
  std::size_t i_ = 0;
};

Architecture two_layer_node_arch(std::vector<std::vector<std::size_t>> choice) {
  Architecture a;
  const std::vector<OpId> aggs = {OpId::kGcn, OpId::kGat, OpId::kGin};
  a.slots = {{"agg0", OpCategory::kAgg, 0, aggs}, {"agg1", OpCategory::kAgg, 1, aggs}};
  a.choice = std::move(choice);
  return a;
}

std::uint64_t net_hash(const SuperNet& net) {
  std::uint64_t h = 0;
  net.visit(SuperNet::ConstVisitor([&](ParamGroup, const std::string&, const Tensor& t) {
    h = h * 31 + hash_values(t);
  }));
  return h;
}

int run_cli(std::vector<std::string> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "dsgas");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  err = e.str();
  return code;
}

}  // namespace

TEST_CASE("linear_probe: separable embeddings score 1.0") {
  Rng rng = make_rng(1, Stream::kSynthetic);
  std::vector<int> labels;
  const Tensor z = blobs({{-5, 0}, {5, 0}, {0, 8}}, 30, 0.5, labels, rng);
  const ProbeReport r = linear_probe(z, labels, ProbeProtocol::defaults_for(ProbeKind::kGraphFolds));
  CHECK(r.per_fold.size() == 50);
  CHECK(r.mean == 1.0);
  CHECK(r.std == 0.0);

  const ProbeReport n = linear_probe(z, labels, ProbeProtocol::defaults_for(ProbeKind::kNodeSplits));
  CHECK(n.per_fold.size() == 20);
  CHECK(n.mean == 1.0);
}

TEST_CASE("linear_probe: shuffled labels sit at chance") {
  Rng rng = make_rng(2, Stream::kSynthetic);
  std::vector<int> labels;
  const Tensor z = blobs({{-5, 0}, {5, 0}}, 100, 0.5, labels, rng);
  shuffle(labels, rng);
  const ProbeReport r = linear_probe(z, labels, ProbeProtocol::defaults_for(ProbeKind::kGraphFolds));
  CHECK(std::abs(r.mean - 0.5) <= 0.1);
  CHECK(r.std >= 0.0);
  for (double a : r.per_fold) CHECK((a >= 0.0 && a <= 1.0));
}

TEST_CASE("logistic regression matches a brute-force grid oracle on 2-d data") {
  Rng rng = make_rng(3, Stream::kSynthetic);
  std::vector<int> labels;
  const Tensor z = blobs({{0, 0}, {1.5, 1.0}}, 40, 1.0, labels, rng);  // overlapping classes
  const std::size_t n = labels.size();
  const std::vector<double> x(z.values().begin(), z.values().end());
  const double l2 = 1e-4;
  LogisticRegression model(l2, 500);
  model.fit(x, n, 2, labels, 2);

  // Oracle: standardize independently, then scan the logit-difference
  // weights u = (u0, u1, b) on a grid. Two-class softmax with L2 on both
  // columns has its optimum at w1 = -w0 = u/2, i.e. penalty l2/4 |u|^2.
  double mu[2] = {0, 0}, sd[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) mu[j] += x[i * 2 + j] / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) sd[j] += (x[i * 2 + j] - mu[j]) * (x[i * 2 + j] - mu[j]) / static_cast<double>(n);
  for (double& s : sd) s = std::sqrt(s);
  auto feat = [&](std::size_t i, int j) { return (x[i * 2 + j] - mu[j]) / sd[j]; };
  double best = INFINITY, bu0 = 0, bu1 = 0, bb = 0;
  for (double u0 = -6; u0 <= 6; u0 += 0.1)
    for (double u1 = -6; u1 <= 6; u1 += 0.1)
      for (double b = -3; b <= 3; b += 0.1) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double s = u0 * feat(i, 0) + u1 * feat(i, 1) + b;
          const double m = labels[i] == 1 ? s : -s;
          loss += std::log1p(std::exp(-m));
        }
        loss = loss / static_cast<double>(n) + 0.25 * l2 * (u0 * u0 + u1 * u1);
        if (loss < best) best = loss, bu0 = u0, bu1 = u1, bb = b;
      }
  std::size_t grid_hits = 0, model_hits = 0;
  const std::vector<int> pred = model.predict(x, n);
  for (std::size_t i = 0; i < n; ++i) {
    grid_hits += ((bu0 * feat(i, 0) + bu1 * feat(i, 1) + bb > 0) ? 1 : 0) == labels[i];
    model_hits += pred[i] == labels[i];
  }
  const double grid_acc = static_cast<double>(grid_hits) / static_cast<double>(n);
  const double model_acc = static_cast<double>(model_hits) / static_cast<double>(n);
  MESSAGE("grid acc ", grid_acc, ", model acc ", model_acc, ", grid obj ", best, ", model obj ",
          model.objective(x, n, labels));
  CHECK(std::abs(grid_acc - model_acc) <= 1.0 / static_cast<double>(n) + 1e-12);
  CHECK(model.objective(x, n, labels) <= best + 1e-3);
  CHECK(grid_acc > 0.6);
}

TEST_CASE("linear_probe: reproducible under a fixed seed, seed-sensitive otherwise") {
  Rng rng = make_rng(4, Stream::kSynthetic);
  std::vector<int> labels;
  const Tensor z = blobs({{0, 0}, {1.2, 0}}, 50, 1.0, labels, rng);
  ProbeProtocol p = ProbeProtocol::defaults_for(ProbeKind::kGraphFolds);
  const ProbeReport a = linear_probe(z, labels, p), b = linear_probe(z, labels, p);
  CHECK(a.per_fold == b.per_fold);
  p.seed = 9;
  CHECK(linear_probe(z, labels, p).per_fold != a.per_fold);
}

TEST_CASE("linear_probe: error cases") {
  const Tensor z = Tensor::zeros(20, 3);
  const std::vector<int> one_class(20, 0);
  CHECK_THROWS(linear_probe(z, one_class, ProbeProtocol::defaults_for(ProbeKind::kGraphFolds)));
  CHECK_THROWS(linear_probe(z, one_class, ProbeProtocol::defaults_for(ProbeKind::kNodeSplits)));
  CHECK_THROWS(linear_probe(z, std::vector<int>(19, 0), ProbeProtocol::defaults_for(ProbeKind::kGraphFolds)));
  ProbeProtocol bad = ProbeProtocol::defaults_for(ProbeKind::kGraphFolds);
  bad.folds = 1;
  std::vector<int> two(20);
  for (std::size_t i = 0; i < 20; ++i) two[i] = static_cast<int>(i % 2);
  CHECK_THROWS(linear_probe(z, two, bad));
  CHECK_THROWS(probe_kind_from_string("svm"));
}

TEST_CASE("export_dot: K=1 two-layer chain") {
  const Architecture a = two_layer_node_arch({{0}, {2}});
  const DotGraph g = DotReader(export_dot(a)).parse();
  CHECK(g.nodes == std::set<std::string>{"INPUT", "agg0_GCN", "agg1_GIN"});
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0].from == "INPUT");
  CHECK(g.edges[0].to == "agg0_GCN");
  CHECK(g.edges[1].from == "agg0_GCN");
  CHECK(g.edges[1].to == "agg1_GIN");
  CHECK(g.node_attrs.at("agg0_GCN").at("label") == "GCN");
  CHECK(g.edges[0].attrs.at("color") == factor_color(0));
}

TEST_CASE("export_dot: a shared choice is one node with one edge per factor") {
  const Architecture a = two_layer_node_arch({{0, 0}, {1, 2}});
  const DotGraph g = DotReader(export_dot(a)).parse();
  CHECK(g.nodes == std::set<std::string>{"INPUT", "agg0_GCN", "agg1_GAT", "agg1_GIN"});
  std::set<std::string> colors;
  for (const auto& e : g.edges)
    if (e.to == "agg0_GCN") colors.insert(e.attrs.at("color"));
  CHECK(colors == std::set<std::string>{factor_color(0), factor_color(1)});
  CHECK(factor_color(0) != factor_color(1));
}

TEST_CASE("export_dot: a full graph-task architecture parses and is deterministic") {
  SuperNetConfig cfg;
  cfg.factors = 4;
  cfg.in_dim = 3;
  cfg.hidden = 4;
  const SuperNet net = SuperNet::create(cfg, 11);
  const Architecture a = discretize(net);
  const std::string text = export_dot(a);
  CHECK(text == export_dot(a));
  const DotGraph g = DotReader(text).parse();
  for (const auto& e : g.edges) {
    CHECK(g.nodes.count(e.from) == 1);
    CHECK(e.attrs.count("color") == 1);
  }
  std::size_t into_merge = 0;
  for (const auto& e : g.edges) into_merge += e.to.rfind("merge", 0) == 0;
  CHECK(into_merge == cfg.factors * cfg.layers);
  CHECK_THROWS(DotReader("digraph { a -> }").parse());
}

TEST_CASE("cli: usage errors exit 2") {
  std::string out, err;
  CHECK(run_cli({}, out, err) == 2);
  CHECK(err.find("search") != std::string::npos);
  CHECK(run_cli({"gradcheck", "--bogus"}, out, err) == 2);
  CHECK(run_cli({"frobnicate"}, out, err) == 2);
  CHECK(run_cli({"eval"}, out, err) == 2);
  CHECK(run_cli({"--help"}, out, err) == 0);
}

TEST_CASE("cli: runtime failures exit 1 with a diagnostic") {
  const fs::path dir = fs::temp_directory_path() / "dsgas_cli_fail";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.yaml") << "model:\n  factors: 0\n";
    std::ofstream(dir / "junk.dsgs") << "not a checkpoint";
  }
  std::string out, err;
  CHECK(run_cli({"search", "--config", (dir / "bad.yaml").string()}, out, err) == 1);
  CHECK(err.rfind("error: ", 0) == 0);
  CHECK(run_cli({"eval", "--checkpoint", (dir / "junk.dsgs").string()}, out, err) == 1);
}

TEST_CASE("cli: gradcheck reports a passing max relative error") {
  std::string out, err;
  CHECK(run_cli({"gradcheck", "--seeds", "2"}, out, err) == 0);
  CHECK(out.find("max rel. error") != std::string::npos);
  CHECK(out.find("PASS") != std::string::npos);
}

TEST_CASE("cli: synth, search, eval and export end to end; eval leaves parameters alone") {
  const fs::path dir = fs::temp_directory_path() / "dsgas_cli_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "synth.yaml");
    f << "seed: 2\ndataset:\n  name: TOY\nsynthetic:\n  num_graphs: 30\n";
  }
  std::string out, err;
  REQUIRE(run_cli({"synth", "--spec", (dir / "synth.yaml").string(), "--out", (dir / "data").string()}, out, err) == 0);
  CHECK(fs::exists(dir / "data" / "TOY_A.txt"));
  {
    std::ofstream f(dir / "run.yaml");
    f << "seed: 2\ndataset:\n  source: tudataset\n  path: data\n  name: TOY\n"
         "model:\n  factors: 2\n  hidden: 8\n  layers: 2\n"
         "search:\n  epochs: 2\n  batch_size: 10\noutput:\n  dir: out\n";
  }
  REQUIRE(run_cli({"search", "--config", (dir / "run.yaml").string()}, out, err) == 0);
  CHECK(out.find("factor 1:") != std::string::npos);
  const fs::path ck = dir / "out" / "checkpoint.dsgs";
  REQUIRE(fs::exists(ck));
  CHECK(fs::exists(dir / "out" / "architecture.dot"));

  const Checkpoint before = load_checkpoint(ck);
  const std::uint64_t h = net_hash(before.state.net);
  const Tensor emb = embed_dataset(before.state.net, load_dataset(before.config), ProbeEmbedding::kMixed);
  linear_probe(emb, load_dataset(before.config).labels(), ProbeProtocol::defaults_for(ProbeKind::kGraphFolds));
  CHECK(net_hash(before.state.net) == h);

  REQUIRE(run_cli({"eval", "--checkpoint", ck.string()}, out, err) == 0);
  CHECK(out.find("±") != std::string::npos);
  CHECK(out.find("over 50 folds") != std::string::npos);
  CHECK(net_hash(load_checkpoint(ck).state.net) == h);

  REQUIRE(run_cli({"export", "--checkpoint", ck.string(), "--out", (dir / "arch.dot").string()}, out, err) == 0);
  std::ifstream dot(dir / "arch.dot");
  const std::string text{std::istreambuf_iterator<char>(dot), {}};
  CHECK_NOTHROW(DotReader(text).parse());
}

}  // namespace dsgas
