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

#include "dclp/cellgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

namespace dclp {

namespace {

std::vector<std::vector<int>> successors(const CellGraph& g) {
  std::vector<std::vector<int>> out(std::max(g.node_count, 0));
  for (const Edge& e : g.edges) {
    if (e.from >= 0 && e.from < g.node_count && e.to >= 0 &&
        e.to < g.node_count) {
      out[e.from].push_back(e.to);
    }
  }
  return out;
}

std::vector<std::vector<int>> predecessors(const CellGraph& g) {
  std::vector<std::vector<int>> in(std::max(g.node_count, 0));
  for (const Edge& e : g.edges) {
    if (e.from >= 0 && e.from < g.node_count && e.to >= 0 &&
        e.to < g.node_count) {
      in[e.to].push_back(e.from);
    }
  }
  return in;
}

std::vector<bool> reachable_from(const std::vector<std::vector<int>>& adj,
                                 int start) {
  std::vector<bool> seen(adj.size(), false);
  if (start < 0 || start >= static_cast<int>(adj.size())) return seen;
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

std::string edge_key(const Edge& e) {
  return std::to_string(e.from) + "-" + std::to_string(e.to);
}

Edge parse_edge_key(const std::string& key) {
  auto dash = key.find('-');
  if (dash == std::string::npos) {
    throw invalid_argument("malformed edge key '" + key + "'");
  }
  try {
    return Edge{std::stoi(key.substr(0, dash)), std::stoi(key.substr(dash + 1))};
  } catch (const std::exception&) {
    throw invalid_argument("malformed edge key '" + key + "'");
  }
}

void add(ValidationReport& r, ViolationKind kind, std::string msg) {
  r.violations.push_back({kind, std::move(msg)});
}

}  // namespace

std::string to_string(CellFormat format) {
  return format == CellFormat::kOon ? "oon" : "ooe";
}

CellFormat cell_format_from_string(const std::string& name) {
  if (name == "oon") return CellFormat::kOon;
  if (name == "ooe") return CellFormat::kOoe;
  throw invalid_argument("unknown cell format '" + name + "'");
}

bool CellGraph::has_edge(int from, int to) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{from, to});
}

CellGraph make_oon(std::vector<std::string> node_ops, std::vector<Edge> edges) {
  CellGraph g;
  g.format = CellFormat::kOon;
  g.node_count = static_cast<int>(node_ops.size());
  g.node_ops = std::move(node_ops);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

CellGraph make_ooe(int node_count, std::map<Edge, std::string> edge_ops) {
  CellGraph g;
  g.format = CellFormat::kOoe;
  g.node_count = node_count;
  for (const auto& [e, op] : edge_ops) g.edges.push_back(e);
  g.edge_ops = std::move(edge_ops);
  return g;
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

ValidationReport validate(const CellGraph& g) {
  ValidationReport r;
  const int n = g.node_count;
  if (n < 2) {
    add(r, ViolationKind::kNodeCount,
        "node count " + std::to_string(n) + " below minimum of 2");
    return r;
  }

  if (g.format == CellFormat::kOon) {
    if (static_cast<int>(g.node_ops.size()) != n) {
      add(r, ViolationKind::kFormat, "OON node_ops length differs from node count");
    }
    if (!g.edge_ops.empty()) {
      add(r, ViolationKind::kFormat, "OON graph carries edge_ops");
    }
  } else {
    if (!g.node_ops.empty()) {
      add(r, ViolationKind::kFormat, "OOE graph carries node_ops");
    }
    bool keys_match = g.edge_ops.size() == g.edges.size();
    for (const Edge& e : g.edges) {
      if (!g.edge_ops.contains(e)) keys_match = false;
    }
    if (!keys_match) {
      add(r, ViolationKind::kFormat, "OOE edge_ops keys differ from edge set");
    }
  }

  bool ordering_ok = true;
  for (const Edge& e : g.edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      add(r, ViolationKind::kEdgeRange, "edge " + edge_key(e) + " out of range");
      ordering_ok = false;
    } else if (e.from >= e.to) {
      add(r, ViolationKind::kCycleOrOrdering,
          "cycle/ordering: edge " + edge_key(e) + " violates topological order");
      ordering_ok = false;
    }
  }

  if (g.format == CellFormat::kOon &&
      static_cast<int>(g.node_ops.size()) == n) {
    if (g.node_ops.front() != kInputOp) {
      add(r, ViolationKind::kMarker, "first node is not the input marker");
    }
    if (g.node_ops.back() != kOutputOp) {
      add(r, ViolationKind::kMarker, "last node is not the output marker");
    }
    for (int i = 1; i + 1 < n; ++i) {
      if (g.node_ops[i] == kInputOp || g.node_ops[i] == kOutputOp) {
        add(r, ViolationKind::kMarker,
            "interior node " + std::to_string(i) + " carries a marker label");
      }
    }
  }

  if (!ordering_ok) return r;

  const auto succ = successors(g);
  const auto pred = predecessors(g);
  if (!pred[0].empty()) {
    add(r, ViolationKind::kSource, "input node has incoming edges");
  }
  if (!succ[n - 1].empty()) {
    add(r, ViolationKind::kSink, "output node has outgoing edges");
  }
  const auto from_input = reachable_from(succ, 0);
  const auto to_output = reachable_from(pred, n - 1);
  if (!from_input[n - 1]) {
    add(r, ViolationKind::kSink, "output not reachable from input");
  }
  for (int v = 1; v + 1 < n; ++v) {
    if (!from_input[v] || !to_output[v]) {
      add(r, ViolationKind::kDanglingNode,
          "dangling node " + std::to_string(v) +
              " is not on an input->output path");
    }
  }
  return r;
}

ValidationReport validate(const CellGraph& g, std::span<const std::string> ops) {
  ValidationReport r = validate(g);
  auto known = [&](const std::string& op) {
    return std::find(ops.begin(), ops.end(), op) != ops.end();
  };
  if (g.format == CellFormat::kOon) {
    for (int i = 1; i + 1 < static_cast<int>(g.node_ops.size()); ++i) {
      if (!known(g.node_ops[i])) {
        add(r, ViolationKind::kUnknownOp, "unknown op '" + g.node_ops[i] + "'");
      }
    }
  } else {
    for (const auto& [e, op] : g.edge_ops) {
      if (!known(op)) {
        add(r, ViolationKind::kUnknownOp, "unknown op '" + op + "'");
      }
    }
  }
  return r;
}

CellGraph permute_nodes(const CellGraph& g, std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != g.node_count) {
    throw invalid_argument("permutation length differs from node count");
  }
  CellGraph out;
  out.format = g.format;
  out.node_count = g.node_count;
  if (g.format == CellFormat::kOon) {
    out.node_ops.resize(g.node_ops.size());
    for (int i = 0; i < g.node_count; ++i) out.node_ops[perm[i]] = g.node_ops[i];
  }
  for (const Edge& e : g.edges) {
    Edge m{perm[e.from], perm[e.to]};
    out.edges.push_back(m);
    if (g.format == CellFormat::kOoe) out.edge_ops[m] = g.edge_ops.at(e);
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

CellGraph relabel_topological(const CellGraph& g) {
  const int n = g.node_count;
  for (const Edge& e : g.edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      throw invalid_argument("edge " + edge_key(e) + " out of range");
    }
  }
  const auto succ = successors(g);
  std::vector<int> indeg(n, 0);
  for (const Edge& e : g.edges) ++indeg[e.to];
  const std::vector<int> original_indeg = indeg;
  auto label = [&](int v) -> const std::string& {
    static const std::string kEmpty;
    return g.format == CellFormat::kOon ? g.node_ops[v] : kEmpty;
  };
  using Key = std::tuple<int, std::string, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (int v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.emplace(original_indeg[v], label(v), v);
  }
  std::vector<int> perm(n, -1);
  int next = 0;
  while (!ready.empty()) {
    int v = std::get<2>(ready.top());
    ready.pop();
    perm[v] = next++;
    for (int w : succ[v]) {
      if (--indeg[w] == 0) ready.emplace(original_indeg[w], label(w), w);
    }
  }
  if (next != n) throw invalid_argument("cycle/ordering: graph has a directed cycle");
  return permute_nodes(g, perm);
}

MatrixEncoding encode_matrices(const CellGraph& g,
                               std::span<const std::string> vocabulary) {
  if (g.format != CellFormat::kOon) {
    throw invalid_argument("encode_matrices requires an OON graph; convert with to_oon");
  }
  const int n = g.node_count;
  MatrixEncoding enc;
  enc.adjacency = Eigen::MatrixXi::Zero(n, n);
  enc.attributes = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(vocabulary.size()));
  for (const Edge& e : g.edges) enc.adjacency(e.from, e.to) = 1;
  for (int i = 0; i < n; ++i) {
    auto it = std::find(vocabulary.begin(), vocabulary.end(), g.node_ops[i]);
    if (it == vocabulary.end()) {
      throw invalid_argument("op '" + g.node_ops[i] + "' missing from encoding vocabulary");
    }
    enc.attributes(i, it - vocabulary.begin()) = 1.0;
  }
  return enc;
}

CellGraph decode_matrices(const MatrixEncoding& enc,
                          std::span<const std::string> vocabulary) {
  const auto n = enc.adjacency.rows();
  if (enc.adjacency.cols() != n || enc.attributes.rows() != n ||
      enc.attributes.cols() != static_cast<Eigen::Index>(vocabulary.size())) {
    throw invalid_argument("matrix encoding shape mismatch");
  }
  std::vector<std::string> ops;
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    enc.attributes.row(i).maxCoeff(&best);
    ops.push_back(vocabulary[best]);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (enc.adjacency(i, j) != 0) edges.push_back({int(i), int(j)});
    }
  }
  return make_oon(std::move(ops), std::move(edges));
}

CellGraph to_oon(const CellGraph& g) {
  if (g.format != CellFormat::kOoe) {
    throw invalid_argument("to_oon requires an OOE graph");
  }
  // g.edges is sorted by (from, to); edge node k sits at index k + 1, which
  // is topological because an edge a->b always sorts before any b->c.
  const int m = g.edge_count();
  std::vector<std::string> ops;
  ops.reserve(m + 2);
  ops.emplace_back(kInputOp);
  for (const Edge& e : g.edges) ops.push_back(g.edge_ops.at(e));
  ops.emplace_back(kOutputOp);
  const int sink = g.node_count - 1;
  std::vector<Edge> edges;
  for (int a = 0; a < m; ++a) {
    const Edge& ea = g.edges[a];
    if (ea.from == 0) edges.push_back({0, a + 1});
    if (ea.to == sink) edges.push_back({a + 1, m + 1});
    for (int b = 0; b < m; ++b) {
      if (g.edges[b].from == ea.to) edges.push_back({a + 1, b + 1});
    }
  }
  return make_oon(std::move(ops), std::move(edges));
}

CellGraph as_oon(const CellGraph& g) {
  return g.format == CellFormat::kOon ? g : to_oon(g);
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

Digest Digest::from_hex(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw invalid_argument("malformed digest '" + s + "'");
  }
  return Digest{std::stoull(s, nullptr, 16)};
}

Digest canonical_hash(const CellGraph& input) {
  const CellGraph g = as_oon(input);
  const int n = g.node_count;
  const auto succ = successors(g);
  const auto pred = predecessors(g);
  std::vector<std::uint64_t> color(n);
  for (int v = 0; v < n; ++v) color[v] = fnv1a64(g.node_ops[v]);
  std::vector<std::uint64_t> next(n);
  std::vector<std::uint64_t> scratch;
  for (int round = 0; round < n; ++round) {
    for (int v = 0; v < n; ++v) {
      std::uint64_t h = hash_combine(color[v], 0x51u);
      scratch.clear();
      for (int w : pred[v]) scratch.push_back(color[w]);
      std::sort(scratch.begin(), scratch.end());
      for (auto c : scratch) h = hash_combine(h, c);
      h = hash_combine(h, 0x52u);
      scratch.clear();
      for (int w : succ[v]) scratch.push_back(color[w]);
      std::sort(scratch.begin(), scratch.end());
      for (auto c : scratch) h = hash_combine(h, c);
      next[v] = h;
    }
    color.swap(next);
  }
  std::sort(color.begin(), color.end());
  std::uint64_t h = fnv1a64(to_string(input.format));
  h = hash_combine(h, static_cast<std::uint64_t>(n));
  h = hash_combine(h, static_cast<std::uint64_t>(g.edge_count()));
  for (auto c : color) h = hash_combine(h, c);
  return Digest{h};
}

int longest_path(const CellGraph& input) {
  const CellGraph g = as_oon(input);
  const int n = g.node_count;
  if (n == 0) return 0;
  // Kahn order, so any node labelling works.
  std::vector<std::vector<int>> out(n);
  std::vector<int> indeg(n, 0);
  for (const Edge& e : g.edges) {
    out[e.from].push_back(e.to);
    ++indeg[e.to];
  }
  std::vector<int> dist(n, -1);
  dist[0] = 0;
  std::vector<int> ready;
  for (int v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push_back(v);
  }
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    for (int w : out[v]) {
      if (dist[v] >= 0) dist[w] = std::max(dist[w], dist[v] + 1);
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  return std::max(dist[n - 1], 0);
}

void to_json(nlohmann::json& j, const CellGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.from, e.to});
  nlohmann::json edge_ops = nlohmann::json::object();
  for (const auto& [e, op] : g.edge_ops) edge_ops[edge_key(e)] = op;
  j = nlohmann::json{{"format", to_string(g.format)},
                     {"nodes", g.node_count},
                     {"edges", std::move(edges)},
                     {"node_ops", g.node_ops},
                     {"edge_ops", std::move(edge_ops)}};
}

void from_json(const nlohmann::json& j, CellGraph& g) {
  g = CellGraph{};
  g.format = cell_format_from_string(j.at("format").get<std::string>());
  g.node_count = j.at("nodes").get<int>();
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) {
      throw invalid_argument("edge entries must be [from, to] pairs");
    }
    g.edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  if (j.contains("node_ops")) g.node_ops = j["node_ops"].get<std::vector<std::string>>();
  if (j.contains("edge_ops")) {
    for (const auto& [key, op] : j["edge_ops"].items()) {
      g.edge_ops[parse_edge_key(key)] = op.get<std::string>();
    }
  }
}

}  // namespace dclp
