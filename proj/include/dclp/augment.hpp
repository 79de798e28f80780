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

// Positive-sample generation for contrastive pre-training.
//
// Augmentations operate on OON cells and record an exact edit trace relative
// to their origin, so difficulty can be read off the trace later.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dclp/cellgraph.hpp"
#include "dclp/common.hpp"

namespace dclp {

enum class AugmentMethod { kEdgePerturbation, kAttributeMasking, kMixed };

std::string to_string(AugmentMethod method);
AugmentMethod augment_method_from_string(const std::string& name);

struct AugmentationSpec {
  AugmentMethod method = AugmentMethod::kMixed;
  // Fixed change ratio. When unset, every candidate draws its own ratio
  // uniformly from `ratio_choices`.
  std::optional<double> ratio;
  std::vector<double> ratio_choices{0.05, 0.1, 0.2, 0.3, 0.4};
  int candidates = 8;

  void check() const;
};

struct Edit {
  enum class Kind { kEdgeAdded, kEdgeRemoved, kOpChanged };

  Kind kind = Kind::kEdgeAdded;
  int from = 0;  // node for kOpChanged
  int to = 0;
  std::string old_op;
  std::string new_op;

  bool operator==(const Edit&) const = default;
};

struct AugmentedGraph {
  CellGraph graph;
  Digest origin_hash;
  std::vector<Edit> edits;
};

// Replays `edits` on `origin`. Throws if an edit does not apply.
CellGraph apply_edits(const CellGraph& origin, std::span<const Edit> edits);

// Flips ceil(ratio * |E|) edge slots, each chosen uniformly among the flips
// that keep the cell valid and do not revisit an already-flipped slot.
AugmentedGraph edge_perturbation(const CellGraph& g, double ratio, Rng& rng);

// Relabels ceil(ratio * interior) distinct interior nodes, each to a
// uniformly chosen different operation from `ops`.
AugmentedGraph attribute_masking(const CellGraph& g, double ratio,
                                 std::span<const std::string> ops, Rng& rng);

// `spec.candidates` independent augmentations of `g`. OOE cells are converted
// to OON first; `ops` is the OON-level operation vocabulary.
std::vector<AugmentedGraph> generate_candidates(const CellGraph& g,
                                                const AugmentationSpec& spec,
                                                std::span<const std::string> ops,
                                                Rng& rng);

// Number of elements changed for a ratio; tolerant of ratios like 1/9 whose
// product with 9 lands a hair above an integer.
int forced_count(double ratio, int population);

nlohmann::json edits_to_json(std::span<const Edit> edits);

}  // namespace dclp
