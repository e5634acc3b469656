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

#include <set>
#include <sstream>

#include "dsgas/evalcli.hpp"

namespace dsgas {

const std::string& factor_color(std::size_t k) {
  static const std::string kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
}

std::string export_dot(const Architecture& arch) {
  const std::size_t K = arch.factors();
  auto node_id = [&](std::size_t slot, std::size_t k) {
    return arch.slots[slot].name + "_" + std::string(op_name(arch.op(slot, k)));
  };

  std::ostringstream out;
  out << "digraph architecture {\n";
  out << "  rankdir=TB;\n";
  out << "  node [shape=box, style=rounded];\n";
  out << "  \"INPUT\" [shape=ellipse];\n";

  std::set<std::string> declared;
  for (std::size_t s = 0; s < arch.slots.size(); ++s)
    for (std::size_t k = 0; k < K; ++k) {
      const std::string id = node_id(s, k);
      if (!declared.insert(id).second) continue;
      out << "  \"" << id << "\" [label=\"" << op_name(arch.op(s, k)) << "\", group=\"" << arch.slots[s].name
          << "\"];\n";
    }

  // Per factor: the aggregation chain, each pool reading its layer, the
  // merge reading every pool.
  std::vector<std::size_t> agg, pool, merge;
  for (std::size_t s = 0; s < arch.slots.size(); ++s) {
    switch (arch.slots[s].category) {
      case OpCategory::kAgg:
        agg.push_back(s);
        break;
      case OpCategory::kPool:
        pool.push_back(s);
        break;
      case OpCategory::kMerge:
        merge.push_back(s);
        break;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    auto edge = [&](const std::string& from, const std::string& to) {
      out << "  \"" << from << "\" -> \"" << to << "\" [color=\"" << factor_color(k) << "\", label=\"" << k
          << "\"];\n";
    };
    std::string prev = "INPUT";
    for (std::size_t s : agg) {
      edge(prev, node_id(s, k));
      prev = node_id(s, k);
    }
    for (std::size_t i = 0; i < pool.size() && i < agg.size(); ++i) edge(node_id(agg[i], k), node_id(pool[i], k));
    for (std::size_t m : merge)
      for (std::size_t p : pool) edge(node_id(p, k), node_id(m, k));
  }
  out << "}\n";
  return out.str();
}

}  // namespace dsgas
