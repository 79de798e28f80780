// Copyright 2026 The DCLP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dclp/difficulty.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace dclp {

DifficultyScore edit_difficulty(const AugmentedGraph& a) {
  DifficultyScore s;
  s.ld = static_cast<int>(a.edits.size());
  s.size_g_hat = a.graph.edge_count();
  int added = 0;
  int removed = 0;
  for (const Edit& e : a.edits) {
    if (e.kind == Edit::Kind::kEdgeAdded) ++added;
    if (e.kind == Edit::Kind::kEdgeRemoved) ++removed;
  }
  s.size_g = s.size_g_hat - added + removed;
  if (s.size_g <= 0 || s.size_g_hat <= 0) {
    throw invalid_argument("degenerate graph: zero edges in difficulty normalisation");
  }
  s.value = static_cast<double>(s.ld) / (static_cast<double>(s.size_g) * s.size_g_hat);
  return s;
}

int ged_bruteforce(const CellGraph& g1, const CellGraph& g2) {
  if (g1.node_count > kGedMaxNodes || g2.node_count > kGedMaxNodes) {
    throw invalid_argument("ged_bruteforce: graphs exceed " +
                           std::to_string(kGedMaxNodes) + " nodes");
  }
  if (g1.format != g2.format || g1.node_count != g2.node_count) {
    throw invalid_argument("ged_bruteforce: graphs differ in format or node count");
  }
  const int n = g1.node_count;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int best = std::numeric_limits<int>::max();
  do {
    int cost = 0;
    if (g1.format == CellFormat::kOon) {
      for (int v = 0; v < n; ++v) cost += g1.node_ops[v] != g2.node_ops[perm[v]];
      for (const Edge& e : g1.edges) cost += !g2.has_edge(perm[e.from], perm[e.to]);
      // Edges of g2 without a preimage must be added.
      int matched = 0;
      for (const Edge& e : g1.edges) matched += g2.has_edge(perm[e.from], perm[e.to]);
      cost += g2.edge_count() - matched;
    } else {
      int matched = 0;
      for (const auto& [e, op] : g1.edge_ops) {
        auto it = g2.edge_ops.find(Edge{perm[e.from], perm[e.to]});
        if (it == g2.edge_ops.end()) {
          ++cost;
        } else {
          ++matched;
          cost += it->second != op;
        }
      }
      cost += g2.edge_count() - matched;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace dclp
