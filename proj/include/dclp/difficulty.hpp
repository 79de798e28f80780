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

#pragma once

#include "dclp/augment.hpp"
#include "dclp/cellgraph.hpp"

namespace dclp {

// Contrastive difficulty of a positive sample: edit count normalised by the
// product of both graphs' edge counts.
struct DifficultyScore {
  double value = 0.0;
  int ld = 0;
  int size_g = 0;
  int size_g_hat = 0;
};

// Reads the edit count off the recorded trace. The origin's edge count is
// recovered from the trace as well. Throws on a zero-edge graph.
DifficultyScore edit_difficulty(const AugmentedGraph& a);

// Exact minimum number of edge additions/removals and op relabels turning
// g1 into a graph isomorphic to g2, by exhaustive search over node
// bijections. Both graphs must share format and node count and have at most
// `kGedMaxNodes` nodes.
inline constexpr int kGedMaxNodes = 6;
int ged_bruteforce(const CellGraph& g1, const CellGraph& g2);

}  // namespace dclp
