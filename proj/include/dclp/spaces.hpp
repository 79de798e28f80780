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

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dclp/cellgraph.hpp"
#include "dclp/common.hpp"

namespace dclp {

struct SearchSpaceSpec {
  std::string name;
  CellFormat format = CellFormat::kOon;
  int max_nodes = 7;
  int max_edges = 9;
  std::vector<std::string> vocabulary;  // operations, markers excluded

  // NAS-Bench-101-like: OON, <= 7 nodes, <= 9 edges, three operations.
  static SearchSpaceSpec nb101();
  // NAS-Bench-201-like: OOE, complete 4-node DAG, five operations.
  static SearchSpaceSpec nb201();
  static SearchSpaceSpec by_name(const std::string& name);

  // Encoding vocabulary for the model: input marker, ops, output marker.
  std::vector<std::string> encoding_vocabulary() const;
  void check() const;
};

CellGraph sample_uniform(const SearchSpaceSpec& space, Rng& rng);

// All single-edit neighbours of `g` that remain valid in `space`.
std::vector<CellGraph> single_edit_neighbors(const SearchSpaceSpec& space,
                                             const CellGraph& g);

// Uniformly chosen valid single-edit neighbour.
CellGraph mutate(const SearchSpaceSpec& space, const CellGraph& g, Rng& rng);

// Streams each distinct architecture of `space` at most once, stopping after
// `limit` graphs (0 = no limit) or when `sink` returns false.
std::size_t enumerate(const SearchSpaceSpec& space, std::size_t limit,
                      const std::function<bool(const CellGraph&)>& sink);

struct BenchmarkRecord {
  CellGraph graph;
  double accuracy = 0.0;
  std::map<std::string, double> metrics;
};

class MissingArchitecture : public Error {
 public:
  explicit MissingArchitecture(Digest hash)
      : Error(ErrorKind::kRuntime, "architecture " + hash.hex() + " not in table"),
        hash_(hash) {}
  Digest hash() const { return hash_; }

 private:
  Digest hash_;
};

class TableParseError : public Error {
 public:
  TableParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::kArtifact, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateRecord : public Error {
 public:
  DuplicateRecord(std::size_t line, Digest hash)
      : Error(ErrorKind::kArtifact, "line " + std::to_string(line) +
                                        ": duplicate record for architecture " +
                                        hash.hex()),
        line_(line), hash_(hash) {}
  std::size_t line() const { return line_; }
  Digest hash() const { return hash_; }

 private:
  std::size_t line_;
  Digest hash_;
};

// Tabular ground truth keyed by canonical hash. Insertion order is kept so
// iteration is deterministic.
class BenchmarkTable {
 public:
  explicit BenchmarkTable(SearchSpaceSpec space) : space_(std::move(space)) {}

  // Validates the record; throws DuplicateRecord (line 0) on a repeat.
  void insert(BenchmarkRecord record);

  const SearchSpaceSpec& space() const { return space_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<BenchmarkRecord>& records() const { return records_; }
  const std::vector<Digest>& hashes() const { return hashes_; }
  const BenchmarkRecord* find(const Digest& hash) const;
  bool contains(const CellGraph& g) const;

 private:
  friend BenchmarkTable load_table(const std::filesystem::path&, const SearchSpaceSpec&);

  SearchSpaceSpec space_;
  std::vector<BenchmarkRecord> records_;
  std::vector<Digest> hashes_;
  std::unordered_map<Digest, std::size_t> index_;
};

double lookup_performance(const BenchmarkTable& table, const CellGraph& g);

// JSON Lines: {"graph": <cell>, "accuracy": float, "metrics": {...}}.
BenchmarkTable load_table(const std::filesystem::path& path, const SearchSpaceSpec& space);
void save_table(const BenchmarkTable& table, const std::filesystem::path& path);

// Deterministic desk-scale stand-in for trained-network accuracy:
// logistic(weights . features) plus hash-keyed uniform noise.
struct SyntheticOracle {
  std::vector<std::string> ops;  // count slots, one per operation
  std::vector<double> weights;   // |ops| + 2: op counts, longest path, edges
  double noise_scale = 0.0;
  std::uint64_t seed = 0;

  static SyntheticOracle for_space(const SearchSpaceSpec& space, std::uint64_t seed,
                                   double noise_scale = 0.01);

  std::vector<double> features(const CellGraph& g) const;
};

double synthetic_performance(const SyntheticOracle& oracle, const CellGraph& g);

// Labels `count` distinct sampled cells (or the whole space when the space is
// enumerable and smaller) with the oracle.
BenchmarkTable synthetic_table(const SearchSpaceSpec& space, const SyntheticOracle& oracle,
                               std::size_t count, Rng& rng);

}  // namespace dclp
