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


// Predictor-guided architecture search.
//
// Every strategy accumulates at most K architectures per iteration into a
// deduplicated pool; only the pool is ever evaluated with ground truth, so a
// run costs at most K * T queries.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dclp/cellgraph.hpp"
#include "dclp/common.hpp"
#include "dclp/spaces.hpp"

namespace dclp {

enum class SearchStrategy { kRandom, kEvolution, kRl };

std::string to_string(SearchStrategy s);
SearchStrategy search_strategy_from_string(const std::string& name);

struct SearchConfig {
  SearchStrategy strategy = SearchStrategy::kRandom;
  int iterations = 10;       // T
  int samples = 100;         // N^t
  int top_k = 5;             // K
  int population = 10;       // EA: N_0
  int max_population = 50;   // EA: oldest evicted beyond this
  double policy_lr = 0.5;    // RL
  double baseline_decay = 0.9;
  std::uint64_t seed = 0;

  int query_budget() const { return top_k * iterations; }
  void check() const;
};

// Where candidates come from. With a population, only its members may be
// proposed (e.g. a benchmark table); otherwise the space is sampled freely.
struct SearchDomain {
  SearchSpaceSpec space;
  std::vector<CellGraph> population;

  bool closed() const { return !population.empty(); }
};

SearchDomain domain_from_table(const BenchmarkTable& table);

// Scores a batch of graphs; larger is better.
using ScoreFn = std::function<std::vector<double>(std::span<const CellGraph>)>;
// Ground-truth performance of one graph.
using Evaluator = std::function<double(const CellGraph&)>;

class SearchExhausted : public Error {
 public:
  explicit SearchExhausted(const std::string& what) : Error(ErrorKind::kRuntime, what) {}
};

struct PoolEntry {
  CellGraph graph;
  Digest hash;
  double predicted = 0.0;
  std::optional<double> truth;
  int iteration = 0;
  SearchStrategy strategy = SearchStrategy::kRandom;
  std::optional<Digest> parent;  // EA only
};

// Set S of Alg. 2: deduplicated by canonical hash, insertion-ordered.
class CandidatePool {
 public:
  // False (and no change) when the hash is already present.
  bool add(PoolEntry entry);
  bool contains(const Digest& h) const { return index_.contains(h); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<PoolEntry>& entries() const { return entries_; }
  std::vector<PoolEntry>& entries() { return entries_; }

 private:
  std::vector<PoolEntry> entries_;
  std::unordered_set<Digest> index_;
};

// Independent categorical distribution per decision site, softmax over
// logits.
class CategoricalPolicy {
 public:
  CategoricalPolicy(int sites, int choices);

  int sites() const { return static_cast<int>(logits_.size()); }
  int choices() const { return choices_; }
  std::vector<double> probabilities(int site) const;
  std::vector<int> sample(Rng& rng) const;
  // Sum over the given sites; choices.size() may be below sites().
  double log_prob(std::span<const int> choices) const;
  double entropy() const;

  // logits += lr * sum_k advantage_k * grad log pi(choices_k) / count.
  void update(std::span<const std::vector<int>> choices, std::span<const double> advantages,
              double lr);

 private:
  int choices_;
  std::vector<std::vector<double>> logits_;
};

struct SearchReport {
  SearchStrategy strategy = SearchStrategy::kRandom;
  std::optional<PoolEntry> best;
  std::vector<PoolEntry> pool;          // with ground truth filled in
  int queries = 0;                      // ground-truth evaluations
  std::vector<nlohmann::json> log;      // one object per iteration
  std::vector<Digest> initial_population;  // EA
};

SearchReport random_search(const SearchDomain& domain, const ScoreFn& predictor,
                           const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng);
SearchReport evolution_search(const SearchDomain& domain, const ScoreFn& predictor,
                              const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng);
SearchReport rl_search(const SearchDomain& domain, const ScoreFn& predictor,
                       const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng);

// Dispatches on cfg.strategy.
SearchReport run_search(const SearchDomain& domain, const ScoreFn& predictor,
                        const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng);

// No predictor: ground-truth-evaluates `budget` distinct uniform samples.
SearchReport random_sampling_baseline(const SearchDomain& domain, const Evaluator& evaluator,
                                      int budget, Rng& rng);

// One JSON object per line.
std::string search_log_jsonl(const SearchReport& report);
nlohmann::json to_json(const PoolEntry& e);

}  // namespace dclp
