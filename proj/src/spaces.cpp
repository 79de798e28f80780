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

#include "dclp/spaces.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace dclp {

namespace {

constexpr int kMaxSampleAttempts = 100000;

// Keeps only nodes lying on an input -> output path. Returns nullopt if the
// output is unreachable.
std::optional<CellGraph> prune(const CellGraph& g) {
  const int n = g.node_count;
  std::vector<std::vector<int>> succ(n), pred(n);
  for (const Edge& e : g.edges) {
    succ[e.from].push_back(e.to);
    pred[e.to].push_back(e.from);
  }
  auto sweep = [n](const std::vector<std::vector<int>>& adj, int start) {
    std::vector<bool> seen(n, false);
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
  };
  const auto fwd = sweep(succ, 0);
  const auto bwd = sweep(pred, n - 1);
  if (!fwd[n - 1]) return std::nullopt;
  std::vector<int> remap(n, -1);
  std::vector<std::string> ops;
  for (int v = 0; v < n; ++v) {
    if (fwd[v] && bwd[v]) {
      remap[v] = static_cast<int>(ops.size());
      ops.push_back(g.node_ops[v]);
    }
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.edges) {
    if (remap[e.from] >= 0 && remap[e.to] >= 0) {
      edges.push_back({remap[e.from], remap[e.to]});
    }
  }
  return make_oon(std::move(ops), std::move(edges));
}

bool fits(const SearchSpaceSpec& space, const CellGraph& g) {
  return g.format == space.format && g.node_count <= space.max_nodes &&
         g.edge_count() <= space.max_edges && validate(g, space.vocabulary).ok();
}

std::vector<Edge> complete_dag(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  }
  return edges;
}

}  // namespace

SearchSpaceSpec SearchSpaceSpec::nb101() {
  return {"nb101", CellFormat::kOon, 7, 9,
          {"conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3"}};
}

SearchSpaceSpec SearchSpaceSpec::nb201() {
  return {"nb201", CellFormat::kOoe, 4, 6,
          {"zero", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"}};
}

SearchSpaceSpec SearchSpaceSpec::by_name(const std::string& name) {
  if (name == "nb101") return nb101();
  if (name == "nb201") return nb201();
  throw Error(ErrorKind::kConfig, "unknown search space '" + name + "'");
}

std::vector<std::string> SearchSpaceSpec::encoding_vocabulary() const {
  std::vector<std::string> out{kInputOp};
  out.insert(out.end(), vocabulary.begin(), vocabulary.end());
  out.emplace_back(kOutputOp);
  return out;
}

void SearchSpaceSpec::check() const {
  if (vocabulary.empty()) throw invalid_argument("search space vocabulary is empty");
  if (max_nodes < 2) throw invalid_argument("search space needs max_nodes >= 2");
  if (format == CellFormat::kOoe && max_edges != max_nodes * (max_nodes - 1) / 2) {
    throw invalid_argument("OOE spaces use the complete DAG on max_nodes nodes");
  }
}

CellGraph sample_uniform(const SearchSpaceSpec& space, Rng& rng) {
  space.check();
  const auto& ops = space.vocabulary;
  if (space.format == CellFormat::kOoe) {
    std::map<Edge, std::string> edge_ops;
    for (const Edge& e : complete_dag(space.max_nodes)) {
      edge_ops[e] = ops[uniform_index(rng, ops.size())];
    }
    return make_ooe(space.max_nodes, std::move(edge_ops));
  }
  const int n = space.max_nodes;
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    std::vector<std::string> node_ops{kInputOp};
    for (int v = 1; v + 1 < n; ++v) node_ops.push_back(ops[uniform_index(rng, ops.size())]);
    node_ops.emplace_back(kOutputOp);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (coin(rng)) edges.push_back({i, j});
      }
    }
    auto pruned = prune(make_oon(std::move(node_ops), std::move(edges)));
    if (!pruned) continue;
    if (fits(space, *pruned)) return relabel_topological(*pruned);
  }
  throw runtime_error("sample_uniform: no valid cell after " +
                      std::to_string(kMaxSampleAttempts) + " attempts");
}

std::vector<CellGraph> single_edit_neighbors(const SearchSpaceSpec& space,
                                             const CellGraph& g) {
  std::vector<CellGraph> out;
  const auto& ops = space.vocabulary;
  if (g.format == CellFormat::kOoe) {
    for (const auto& [e, op] : g.edge_ops) {
      for (const auto& other : ops) {
        if (other == op) continue;
        CellGraph h = g;
        h.edge_ops[e] = other;
        out.push_back(std::move(h));
      }
    }
    return out;
  }
  for (int v = 1; v + 1 < g.node_count; ++v) {
    for (const auto& other : ops) {
      if (other == g.node_ops[v]) continue;
      CellGraph h = g;
      h.node_ops[v] = other;
      out.push_back(std::move(h));
    }
  }
  for (int i = 0; i < g.node_count; ++i) {
    for (int j = i + 1; j < g.node_count; ++j) {
      CellGraph h = g;
      auto it = std::lower_bound(h.edges.begin(), h.edges.end(), Edge{i, j});
      if (it != h.edges.end() && *it == Edge{i, j}) {
        h.edges.erase(it);
      } else {
        h.edges.insert(it, Edge{i, j});
      }
      if (fits(space, h)) out.push_back(std::move(h));
    }
  }
  return out;
}

CellGraph mutate(const SearchSpaceSpec& space, const CellGraph& g, Rng& rng) {
  auto neighbors = single_edit_neighbors(space, g);
  if (neighbors.empty()) {
    throw runtime_error("mutate: cell has no valid single-edit neighbour");
  }
  return relabel_topological(neighbors[uniform_index(rng, neighbors.size())]);
}

std::size_t enumerate(const SearchSpaceSpec& space, std::size_t limit,
                      const std::function<bool(const CellGraph&)>& sink) {
  space.check();
  const auto& ops = space.vocabulary;
  const std::size_t v = ops.size();
  std::size_t emitted = 0;
  auto full = [&] { return limit != 0 && emitted >= limit; };

  if (space.format == CellFormat::kOoe) {
    const auto edges = complete_dag(space.max_nodes);
    std::vector<std::size_t> digits(edges.size(), 0);
    while (!full()) {
      std::map<Edge, std::string> edge_ops;
      for (std::size_t k = 0; k < edges.size(); ++k) edge_ops[edges[k]] = ops[digits[k]];
      ++emitted;
      if (!sink(make_ooe(space.max_nodes, std::move(edge_ops)))) break;
      std::size_t k = 0;
      while (k < digits.size() && ++digits[k] == v) digits[k++] = 0;
      if (k == digits.size()) break;
    }
    return emitted;
  }

  std::unordered_set<Digest> seen;
  for (int n = 2; n <= space.max_nodes && !full(); ++n) {
    const auto slots = complete_dag(n);
    const std::uint64_t masks = std::uint64_t{1} << slots.size();
    for (std::uint64_t mask = 0; mask < masks && !full(); ++mask) {
      if (std::popcount(mask) > space.max_edges) continue;
      std::vector<Edge> edges;
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (mask >> s & 1) edges.push_back(slots[s]);
      }
      std::vector<std::string> node_ops(n, ops.front());
      node_ops.front() = kInputOp;
      node_ops.back() = kOutputOp;
      if (!validate(make_oon(node_ops, edges)).ok()) continue;
      const int interior = n - 2;
      std::vector<std::size_t> digits(interior, 0);
      while (!full()) {
        for (int k = 0; k < interior; ++k) node_ops[k + 1] = ops[digits[k]];
        CellGraph g = relabel_topological(make_oon(node_ops, edges));
        if (seen.insert(canonical_hash(g)).second) {
          ++emitted;
          if (!sink(g)) return emitted;
        }
        int k = 0;
        while (k < interior && ++digits[k] == v) digits[k++] = 0;
        if (k == interior) break;
      }
    }
  }
  return emitted;
}

void BenchmarkTable::insert(BenchmarkRecord record) {
  if (!fits(space_, record.graph)) {
    auto report = validate(record.graph, space_.vocabulary);
    throw invalid_argument("record graph invalid in space '" + space_.name + "'" +
                           (report.ok() ? std::string(": exceeds size limits")
                                        : ": " + report.summary()));
  }
  if (!(record.accuracy >= 0.0 && record.accuracy <= 1.0)) {
    throw invalid_argument("accuracy outside [0, 1]");
  }
  Digest h = canonical_hash(record.graph);
  if (index_.contains(h)) throw DuplicateRecord(0, h);
  index_.emplace(h, records_.size());
  hashes_.push_back(h);
  records_.push_back(std::move(record));
}

const BenchmarkRecord* BenchmarkTable::find(const Digest& hash) const {
  auto it = index_.find(hash);
  return it == index_.end() ? nullptr : &records_[it->second];
}

bool BenchmarkTable::contains(const CellGraph& g) const {
  return find(canonical_hash(g)) != nullptr;
}

double lookup_performance(const BenchmarkTable& table, const CellGraph& g) {
  Digest h = canonical_hash(g);
  if (const auto* rec = table.find(h)) return rec->accuracy;
  throw MissingArchitecture(h);
}

BenchmarkTable load_table(const std::filesystem::path& path, const SearchSpaceSpec& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArtifact, "cannot open table '" + path.string() + "'");
  BenchmarkTable table(space);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    BenchmarkRecord rec;
    try {
      auto j = nlohmann::json::parse(line);
      rec.graph = relabel_topological(j.at("graph").get<CellGraph>());
      rec.accuracy = j.at("accuracy").get<double>();
      if (j.contains("metrics")) {
        rec.metrics = j["metrics"].get<std::map<std::string, double>>();
      }
    } catch (const std::exception& e) {
      throw TableParseError(lineno, e.what());
    }
    try {
      table.insert(std::move(rec));
    } catch (const DuplicateRecord& d) {
      throw DuplicateRecord(lineno, d.hash());
    } catch (const Error& e) {
      throw TableParseError(lineno, e.what());
    }
  }
  return table;
}

void save_table(const BenchmarkTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kRuntime, "cannot write table '" + path.string() + "'");
  for (const auto& rec : table.records()) {
    nlohmann::json j{{"graph", rec.graph}, {"accuracy", rec.accuracy},
                     {"metrics", rec.metrics}};
    out << j.dump() << '\n';
  }
}

SyntheticOracle SyntheticOracle::for_space(const SearchSpaceSpec& space,
                                           std::uint64_t seed, double noise_scale) {
  SyntheticOracle o;
  o.ops = space.vocabulary;
  o.noise_scale = noise_scale;
  o.seed = seed;
  if (space.name == "nb101") {
    o.weights = {0.30, 0.12, -0.18, 0.22, -0.05};
  } else if (space.name == "nb201") {
    // Topology is fixed, so path length and edge count carry no signal.
    o.weights = {-0.35, 0.05, 0.20, 0.35, -0.05, 0.0, 0.0};
  } else {
    const double k = static_cast<double>(o.ops.size());
    for (std::size_t i = 0; i < o.ops.size(); ++i) {
      o.weights.push_back(0.3 * (1.0 - 2.0 * static_cast<double>(i) / std::max(1.0, k - 1)));
    }
    o.weights.push_back(0.2);
    o.weights.push_back(-0.05);
  }
  return o;
}

std::vector<double> SyntheticOracle::features(const CellGraph& g) const {
  const CellGraph oon = as_oon(g);
  std::vector<double> f(ops.size() + 2, 0.0);
  for (int v = 1; v + 1 < oon.node_count; ++v) {
    auto it = std::find(ops.begin(), ops.end(), oon.node_ops[v]);
    if (it != ops.end()) f[it - ops.begin()] += 1.0;
  }
  f[ops.size()] = longest_path(oon);
  f[ops.size() + 1] = oon.edge_count();
  return f;
}

double synthetic_performance(const SyntheticOracle& oracle, const CellGraph& g) {
  const auto f = oracle.features(g);
  if (oracle.weights.size() != f.size()) {
    throw invalid_argument("oracle weights length differs from feature count");
  }
  double logit = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) logit += oracle.weights[i] * f[i];
  double score = 1.0 / (1.0 + std::exp(-logit));
  if (oracle.noise_scale > 0.0) {
    std::uint64_t bits = splitmix64(canonical_hash(g).value ^ splitmix64(oracle.seed));
    double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
    score += oracle.noise_scale * (2.0 * u - 1.0);
  }
  return std::clamp(score, 1e-6, 1.0 - 1e-6);
}

BenchmarkTable synthetic_table(const SearchSpaceSpec& space, const SyntheticOracle& oracle,
                               std::size_t count, Rng& rng) {
  BenchmarkTable table(space);
  auto add = [&](const CellGraph& g) {
    table.insert({g, synthetic_performance(oracle, g), {}});
  };
  if (space.format == CellFormat::kOoe) {
    std::size_t total = 1;
    for (int e = 0; e < space.max_edges; ++e) total *= space.vocabulary.size();
    if (count >= total) {
      enumerate(space, 0, [&](const CellGraph& g) {
        add(g);
        return true;
      });
      return table;
    }
  }
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * count + 10000;
  while (table.size() < count) {
    if (++attempts > max_attempts) {
      throw runtime_error("synthetic_table: space exhausted before " +
                          std::to_string(count) + " distinct cells");
    }
    CellGraph g = sample_uniform(space, rng);
    if (!table.contains(g)) add(g);
  }
  return table;
}

}  // namespace dclp
