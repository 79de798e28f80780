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

// Cell DAGs: the universal architecture representation.
//
// A cell is a small DAG with a single input (source) and a single output
// (sink). Operations live either on nodes (OON, NAS-Bench-101 style) or on
// edges (OOE, NAS-Bench-201 style). Valid cells always store their nodes in
// a topological order, i.e. every edge satisfies from < to, with the input
// at index 0 and the output at index node_count - 1.

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dclp/common.hpp"

namespace dclp {

inline constexpr const char* kInputOp = "input";
inline constexpr const char* kOutputOp = "output";

enum class CellFormat { kOon, kOoe };

std::string to_string(CellFormat format);
CellFormat cell_format_from_string(const std::string& name);

struct Edge {
  int from = 0;
  int to = 0;

  auto operator<=>(const Edge&) const = default;
};

struct CellGraph {
  CellFormat format = CellFormat::kOon;
  int node_count = 0;
  std::vector<Edge> edges;             // kept sorted
  std::vector<std::string> node_ops;   // OON only
  std::map<Edge, std::string> edge_ops;  // OOE only

  bool has_edge(int from, int to) const;
  int edge_count() const { return static_cast<int>(edges.size()); }

  bool operator==(const CellGraph&) const = default;
};

// Builders. Edges are sorted and deduplicated; no validation happens here.
CellGraph make_oon(std::vector<std::string> node_ops, std::vector<Edge> edges);
CellGraph make_ooe(int node_count, std::map<Edge, std::string> edge_ops);

enum class ViolationKind {
  kNodeCount,
  kEdgeRange,
  kCycleOrOrdering,
  kSource,
  kSink,
  kDanglingNode,
  kFormat,
  kUnknownOp,
  kMarker,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

// Structural checks only.
ValidationReport validate(const CellGraph& g);
// Structural checks plus membership of every operation label in `ops`
// (the space's operation vocabulary, markers excluded).
ValidationReport validate(const CellGraph& g,
                          std::span<const std::string> ops);

// Relabels nodes into a topological order, breaking ties by
// (in-degree, op label, original index). Throws on a directed cycle.
CellGraph relabel_topological(const CellGraph& g);

// Permutes node indices: node i of `g` becomes node perm[i].
CellGraph permute_nodes(const CellGraph& g, std::span<const int> perm);

struct MatrixEncoding {
  Eigen::MatrixXi adjacency;   // node_count x node_count
  Eigen::MatrixXd attributes;  // node_count x |vocabulary|, one-hot rows
};

// `vocabulary` is the full encoding vocabulary, markers included.
MatrixEncoding encode_matrices(const CellGraph& g,
                               std::span<const std::string> vocabulary);
CellGraph decode_matrices(const MatrixEncoding& enc,
                          std::span<const std::string> vocabulary);

// Line-graph transform: one node per OOE edge carrying its operation, plus
// input/output marker nodes.
CellGraph to_oon(const CellGraph& g);

// OON view of any cell (identity for OON).
CellGraph as_oon(const CellGraph& g);

struct Digest {
  std::uint64_t value = 0;

  std::string hex() const;
  static Digest from_hex(const std::string& s);

  auto operator<=>(const Digest&) const = default;
};

// Isomorphism-invariant digest via Weisfeiler-Lehman refinement over
// (op label, in-neighbour colours, out-neighbour colours).
Digest canonical_hash(const CellGraph& g);

// Length in edges of the longest input -> output path.
int longest_path(const CellGraph& g);

void to_json(nlohmann::json& j, const CellGraph& g);
void from_json(const nlohmann::json& j, CellGraph& g);

}  // namespace dclp

template <>
struct std::hash<dclp::Digest> {
  std::size_t operator()(const dclp::Digest& d) const noexcept {
    return static_cast<std::size_t>(d.value);
  }
};
