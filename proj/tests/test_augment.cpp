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


#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <set>

#include "dclp/augment.hpp"
#include "dclp/difficulty.hpp"
#include "dclp/spaces.hpp"

using namespace dclp;

namespace {

const auto kSpace = SearchSpaceSpec::nb101();

CellGraph sample_with(Rng& rng, int nodes, int edges) {
  while (true) {
    CellGraph g = sample_uniform(kSpace, rng);
    if ((nodes < 0 || g.node_count == nodes) && (edges < 0 || g.edge_count() == edges)) return g;
  }
}

bool inverse_pair(const Edit& a, const Edit& b) {
  if (a.kind == Edit::Kind::kOpChanged || b.kind == Edit::Kind::kOpChanged) {
    return a.kind == b.kind && a.from == b.from;  // a node is never relabeled twice
  }
  return a.kind != b.kind && a.from == b.from && a.to == b.to;
}

}  // namespace

TEST_CASE("zero ratio leaves the graph untouched") {
  Rng rng(1);
  const CellGraph g = sample_with(rng, 7, -1);
  const auto e = edge_perturbation(g, 0.0, rng);
  CHECK(e.graph == g);
  CHECK(e.edits.empty());
  const auto m = attribute_masking(g, 0.0, kSpace.vocabulary, rng);
  CHECK(m.graph == g);
  CHECK(m.edits.empty());
}

TEST_CASE("ceiling arithmetic on edit counts") {
  Rng rng(2);
  const CellGraph nine = sample_with(rng, -1, 9);
  const auto e = edge_perturbation(nine, 1.0 / 9.0, rng);
  CHECK(e.edits.size() == 1);

  const CellGraph seven = sample_with(rng, 7, -1);
  const auto m = attribute_masking(seven, 0.4, kSpace.vocabulary, rng);
  CHECK(m.edits.size() == 2);
  for (const auto& ed : m.edits) CHECK(ed.kind == Edit::Kind::kOpChanged);

  CHECK(forced_count(0.2, 5) == 1);
  CHECK(forced_count(0.3, 10) == 3);
  CHECK(forced_count(0.05, 9) == 1);
  CHECK(forced_count(0.0, 9) == 0);
}

TEST_CASE("masking never keeps the old label") {
  Rng rng(3);
  const CellGraph g = sample_with(rng, 7, -1);
  for (int i = 0; i < 10000; ++i) {
    const auto m = attribute_masking(g, 0.4, kSpace.vocabulary, rng);
    for (const auto& ed : m.edits) {
      CHECK(ed.old_op != ed.new_op);
      CHECK(ed.from > 0);
      CHECK(ed.from < g.node_count - 1);
    }
  }
  const std::vector<std::string> one{"conv3x3-bn-relu"};
  CHECK_THROWS(attribute_masking(g, 0.4, one, rng));
}

TEST_CASE("edge flips are uniform over legal flips") {
  Rng rng(4);
  const CellGraph g = sample_with(rng, 6, 5);  // ratio 0.2 -> one flip
  // Oracle: enumerate every legal single flip.
  std::set<Edge> legal;
  for (int i = 0; i < g.node_count; ++i) {
    for (int j = i + 1; j < g.node_count; ++j) {
      CellGraph t = g;
      if (t.has_edge(i, j)) {
        t.edges.erase(std::find(t.edges.begin(), t.edges.end(), Edge{i, j}));
      } else {
        t.edges.push_back({i, j});
        std::sort(t.edges.begin(), t.edges.end());
      }
      if (validate(t).ok()) legal.insert({i, j});
    }
  }
  REQUIRE(legal.size() >= 2);
  std::map<Edge, double> freq;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const auto a = edge_perturbation(g, 0.2, rng);
    REQUIRE(a.edits.size() == 1);
    const Edge e{a.edits[0].from, a.edits[0].to};
    CHECK(legal.contains(e));
    freq[e] += 1.0;
  }
  const double expected = static_cast<double>(draws) / legal.size();
  double stat = 0.0;
  for (const Edge& e : legal) stat += (freq[e] - expected) * (freq[e] - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(legal.size() - 1));
  CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 0.01);
}

TEST_CASE("replay, validity and minimality over random augmentations") {
  Rng rng(5);
  int produced = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const CellGraph g = sample_uniform(kSpace, rng);
    AugmentationSpec spec;
    spec.candidates = 4;
    spec.method = static_cast<AugmentMethod>(trial % 3);
    std::vector<AugmentedGraph> cands;
    try {
      cands = generate_candidates(g, spec, kSpace.vocabulary, rng);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kRuntime);  // small cell ran out of legal flips
      continue;
    }
    for (const auto& c : cands) {
      ++produced;
      CHECK(c.origin_hash == canonical_hash(g));
      CHECK(validate(c.graph).ok());
      CHECK(apply_edits(g, c.edits) == c.graph);
      for (std::size_t i = 0; i < c.edits.size(); ++i) {
        for (std::size_t j = i + 1; j < c.edits.size(); ++j) {
          CHECK_FALSE(inverse_pair(c.edits[i], c.edits[j]));
        }
      }
    }
  }
  CHECK(produced > 1000);
}

TEST_CASE("candidate generation") {
  Rng rng(6);
  const CellGraph g = sample_with(rng, 7, 9);
  AugmentationSpec spec;
  const auto cands = generate_candidates(g, spec, kSpace.vocabulary, rng);
  CHECK(cands.size() == 8);
  std::set<double> values;
  for (const auto& c : cands) {
    CHECK(c.origin_hash == canonical_hash(g));
    values.insert(edit_difficulty(c).value);
  }
  CHECK(values.size() > 1);

  // Mixed mode: edge edits precede op edits.
  AugmentationSpec mixed;
  mixed.ratio = 0.3;
  for (const auto& c : generate_candidates(g, mixed, kSpace.vocabulary, rng)) {
    CHECK(c.edits.size() == 3u + 2u);
    bool seen_op = false;
    for (const auto& e : c.edits) {
      if (e.kind == Edit::Kind::kOpChanged) seen_op = true;
      else CHECK_FALSE(seen_op);
    }
  }

  AugmentationSpec bad;
  bad.candidates = 0;
  CHECK_THROWS(generate_candidates(g, bad, kSpace.vocabulary, rng));
  bad.candidates = 1;
  bad.ratio = 1.5;
  CHECK_THROWS(generate_candidates(g, bad, kSpace.vocabulary, rng));
}

TEST_CASE("OOE cells are augmented through their OON view") {
  const auto space = SearchSpaceSpec::nb201();
  Rng rng(7);
  const CellGraph g = sample_uniform(space, rng);
  AugmentationSpec spec;
  spec.ratio = 0.2;
  const auto cands = generate_candidates(g, spec, space.vocabulary, rng);
  for (const auto& c : cands) {
    CHECK(c.graph.format == CellFormat::kOon);
    CHECK(c.origin_hash == canonical_hash(g));
    CHECK(apply_edits(to_oon(g), c.edits) == c.graph);
  }
}

TEST_CASE("edits serialise") {
  const std::vector<Edit> edits{{Edit::Kind::kEdgeAdded, 0, 2, "", ""},
                                {Edit::Kind::kOpChanged, 1, 1, "maxpool3x3", "conv1x1-bn-relu"}};
  const auto j = edits_to_json(edits);
  CHECK(j.size() == 2);
  CHECK(j[0]["edge_added"][1] == 2);
  CHECK(j[1]["op_changed"]["new"] == "conv1x1-bn-relu");
}
