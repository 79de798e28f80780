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

#include "dclp/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dclp {

namespace {

void require_oon(const CellGraph& g, const char* who) {
  if (g.format != CellFormat::kOon) {
    throw invalid_argument(std::string(who) + " requires an OON graph");
  }
}

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw invalid_argument("augmentation ratio must lie in [0, 1]");
  }
}

void toggle_edge(CellGraph& g, int from, int to) {
  auto it = std::lower_bound(g.edges.begin(), g.edges.end(), Edge{from, to});
  if (it != g.edges.end() && *it == Edge{from, to}) {
    g.edges.erase(it);
  } else {
    g.edges.insert(it, Edge{from, to});
  }
}

}  // namespace

std::string to_string(AugmentMethod method) {
  switch (method) {
    case AugmentMethod::kEdgePerturbation: return "edge_perturbation";
    case AugmentMethod::kAttributeMasking: return "attribute_masking";
    case AugmentMethod::kMixed: return "mixed";
  }
  return "mixed";
}

AugmentMethod augment_method_from_string(const std::string& name) {
  if (name == "edge_perturbation") return AugmentMethod::kEdgePerturbation;
  if (name == "attribute_masking") return AugmentMethod::kAttributeMasking;
  if (name == "mixed") return AugmentMethod::kMixed;
  throw Error(ErrorKind::kConfig, "unknown augmentation method '" + name + "'");
}

void AugmentationSpec::check() const {
  if (ratio) check_ratio(*ratio);
  if (!ratio && ratio_choices.empty()) {
    throw invalid_argument("augmentation needs a ratio or ratio choices");
  }
  for (double r : ratio_choices) check_ratio(r);
  if (candidates < 1) throw invalid_argument("augmentation needs >= 1 candidate");
}

int forced_count(double ratio, int population) {
  return static_cast<int>(std::ceil(ratio * population - 1e-9));
}

CellGraph apply_edits(const CellGraph& origin, std::span<const Edit> edits) {
  CellGraph g = origin;
  for (const Edit& e : edits) {
    switch (e.kind) {
      case Edit::Kind::kEdgeAdded:
        if (g.has_edge(e.from, e.to)) throw invalid_argument("edit adds an existing edge");
        toggle_edge(g, e.from, e.to);
        break;
      case Edit::Kind::kEdgeRemoved:
        if (!g.has_edge(e.from, e.to)) throw invalid_argument("edit removes a missing edge");
        toggle_edge(g, e.from, e.to);
        break;
      case Edit::Kind::kOpChanged:
        if (e.from < 0 || e.from >= g.node_count || g.node_ops[e.from] != e.old_op) {
          throw invalid_argument("op edit does not match the graph");
        }
        g.node_ops[e.from] = e.new_op;
        break;
    }
  }
  return g;
}

AugmentedGraph edge_perturbation(const CellGraph& g, double ratio, Rng& rng) {
  require_oon(g, "edge_perturbation");
  check_ratio(ratio);
  AugmentedGraph out{g, canonical_hash(g), {}};
  const int required = forced_count(ratio, g.edge_count());
  std::set<Edge> flipped;
  for (int step = 0; step < required; ++step) {
    std::vector<Edge> legal;
    for (int i = 0; i < g.node_count; ++i) {
      for (int j = i + 1; j < g.node_count; ++j) {
        if (flipped.contains({i, j})) continue;
        CellGraph trial = out.graph;
        toggle_edge(trial, i, j);
        if (validate(trial).ok()) legal.push_back({i, j});
      }
    }
    if (legal.empty()) {
      throw runtime_error("edge_perturbation: no valid flip for step " +
                          std::to_string(step + 1) + " of " + std::to_string(required));
    }
    const Edge pick = legal[uniform_index(rng, legal.size())];
    const bool present = out.graph.has_edge(pick.from, pick.to);
    toggle_edge(out.graph, pick.from, pick.to);
    flipped.insert(pick);
    out.edits.push_back({present ? Edit::Kind::kEdgeRemoved : Edit::Kind::kEdgeAdded,
                         pick.from, pick.to, {}, {}});
  }
  return out;
}

AugmentedGraph attribute_masking(const CellGraph& g, double ratio,
                                 std::span<const std::string> ops, Rng& rng) {
  require_oon(g, "attribute_masking");
  check_ratio(ratio);
  AugmentedGraph out{g, canonical_hash(g), {}};
  const int interior = g.node_count - 2;
  const int required = forced_count(ratio, interior);
  if (required == 0) return out;
  if (ops.size() < 2) {
    throw invalid_argument("attribute_masking needs at least two operations");
  }
  std::vector<int> nodes(interior);
  for (int i = 0; i < interior; ++i) nodes[i] = i + 1;
  // Partial Fisher-Yates: the first `required` entries are a uniform subset.
  for (int i = 0; i < required; ++i) {
    std::swap(nodes[i], nodes[i + uniform_index(rng, interior - i)]);
  }
  for (int i = 0; i < required; ++i) {
    const int v = nodes[i];
    const std::string old_op = out.graph.node_ops[v];
    std::vector<std::string> choices;
    for (const auto& op : ops) {
      if (op != old_op) choices.push_back(op);
    }
    const std::string new_op = choices[uniform_index(rng, choices.size())];
    out.graph.node_ops[v] = new_op;
    out.edits.push_back({Edit::Kind::kOpChanged, v, v, old_op, new_op});
  }
  return out;
}

std::vector<AugmentedGraph> generate_candidates(const CellGraph& g,
                                                const AugmentationSpec& spec,
                                                std::span<const std::string> ops,
                                                Rng& rng) {
  spec.check();
  const CellGraph origin = as_oon(g);
  const Digest origin_hash = canonical_hash(g);
  std::vector<AugmentedGraph> out;
  out.reserve(spec.candidates);
  for (int c = 0; c < spec.candidates; ++c) {
    const double ratio =
        spec.ratio ? *spec.ratio
                   : spec.ratio_choices[uniform_index(rng, spec.ratio_choices.size())];
    switch (spec.method) {
      case AugmentMethod::kEdgePerturbation:
        out.push_back(edge_perturbation(origin, ratio, rng));
        break;
      case AugmentMethod::kAttributeMasking:
        out.push_back(attribute_masking(origin, ratio, ops, rng));
        break;
      case AugmentMethod::kMixed: {
        AugmentedGraph a = edge_perturbation(origin, ratio, rng);
        AugmentedGraph b = attribute_masking(a.graph, ratio, ops, rng);
        a.graph = std::move(b.graph);
        a.edits.insert(a.edits.end(), b.edits.begin(), b.edits.end());
        out.push_back(std::move(a));
        break;
      }
    }
    out.back().origin_hash = origin_hash;
  }
  return out;
}

nlohmann::json edits_to_json(std::span<const Edit> edits) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Edit& e : edits) {
    switch (e.kind) {
      case Edit::Kind::kEdgeAdded:
        arr.push_back({{"edge_added", {e.from, e.to}}});
        break;
      case Edit::Kind::kEdgeRemoved:
        arr.push_back({{"edge_removed", {e.from, e.to}}});
        break;
      case Edit::Kind::kOpChanged:
        arr.push_back({{"op_changed", {{"node", e.from}, {"old", e.old_op}, {"new", e.new_op}}}});
        break;
    }
  }
  return arr;
}

}  // namespace dclp
