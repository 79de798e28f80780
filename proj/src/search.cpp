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


#include "dclp/search.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <numeric>
#include <random>
#include <sstream>

namespace dclp {

namespace {

constexpr int kAttemptsPerSample = 200;

std::vector<Digest> hashes_of(std::span<const CellGraph> graphs) {
  std::vector<Digest> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(canonical_hash(g));
  return out;
}

std::vector<std::string> hex_list(std::span<const PoolEntry> entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.hash.hex());
  return out;
}

// Indices of the K largest scores; ties go to the earlier sample.
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, int k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  return idx;
}

std::vector<double> predict_checked(const ScoreFn& predictor, std::span<const CellGraph> graphs) {
  auto scores = predictor(graphs);
  if (scores.size() != graphs.size()) throw runtime_error("predictor returned wrong count");
  for (double s : scores) {
    if (!std::isfinite(s)) throw runtime_error("predictor returned a non-finite score");
  }
  return scores;
}

// Uniform draws of distinct graphs never proposed before.
class UniformSampler {
 public:
  explicit UniformSampler(const SearchDomain& domain) : domain_(domain) {
    if (domain.closed()) {
      remaining_.resize(domain.population.size());
      std::iota(remaining_.begin(), remaining_.end(), 0);
    }
  }

  std::vector<CellGraph> draw(int count, Rng& rng) {
    std::vector<CellGraph> out;
    if (domain_.closed()) {
      if (remaining_.size() < static_cast<std::size_t>(count)) {
        throw SearchExhausted("search space exhausted: " + std::to_string(remaining_.size()) +
                              " unseen architectures left, " + std::to_string(count) +
                              " requested");
      }
      for (int i = 0; i < count; ++i) {
        const std::size_t pick = uniform_index(rng, remaining_.size());
        out.push_back(domain_.population[remaining_[pick]]);
        remaining_[pick] = remaining_.back();
        remaining_.pop_back();
      }
      return out;
    }
    long attempts = static_cast<long>(count) * kAttemptsPerSample;
    while (static_cast<int>(out.size()) < count) {
      if (attempts-- <= 0) throw SearchExhausted("search space exhausted before enough samples");
      CellGraph g = sample_uniform(domain_.space, rng);
      if (seen_.insert(canonical_hash(g)).second) out.push_back(std::move(g));
    }
    return out;
  }

 private:
  const SearchDomain& domain_;
  std::vector<std::size_t> remaining_;
  std::unordered_set<Digest> seen_;
};

// Ground truth for the pool; picks the argmax (first on ties).
void finalize(SearchReport& report, CandidatePool& pool, const Evaluator& evaluator) {
  for (auto& e : pool.entries()) {
    e.truth = evaluator(e.graph);
    ++report.queries;
    if (!report.best || *e.truth > *report.best->truth) report.best = e;
  }
  report.pool = pool.entries();
}

int op_index(const SearchSpaceSpec& space, const std::string& op) {
  const auto it = std::find(space.vocabulary.begin(), space.vocabulary.end(), op);
  if (it == space.vocabulary.end()) throw invalid_argument("operation '" + op + "' not in space");
  return static_cast<int>(it - space.vocabulary.begin());
}

int policy_sites(const SearchSpaceSpec& space) {
  if (space.format == CellFormat::kOoe) return space.max_nodes * (space.max_nodes - 1) / 2;
  return space.max_nodes - 2;
}

// Decision-site choices of a cell: interior node ops (OON) or edge ops in
// edge order (OOE).
std::vector<int> site_choices(const SearchSpaceSpec& space, const CellGraph& g) {
  std::vector<int> out;
  if (g.format == CellFormat::kOoe) {
    for (const auto& [edge, op] : g.edge_ops) out.push_back(op_index(space, op));
  } else {
    for (int i = 1; i + 1 < g.node_count; ++i) out.push_back(op_index(space, g.node_ops[i]));
  }
  return out;
}

CellGraph apply_choices(const SearchSpaceSpec& space, CellGraph g, std::span<const int> choices) {
  if (g.format == CellFormat::kOoe) {
    std::size_t k = 0;
    for (auto& [edge, op] : g.edge_ops) op = space.vocabulary[choices[k++]];
    return g;
  }
  for (int i = 1; i + 1 < g.node_count; ++i) g.node_ops[i] = space.vocabulary[choices[i - 1]];
  return relabel_topological(g);
}

}  // namespace

std::string to_string(SearchStrategy s) {
  switch (s) {
    case SearchStrategy::kRandom: return "random";
    case SearchStrategy::kEvolution: return "evolution";
    case SearchStrategy::kRl: return "rl";
  }
  return "random";
}

SearchStrategy search_strategy_from_string(const std::string& name) {
  if (name == "random") return SearchStrategy::kRandom;
  if (name == "evolution") return SearchStrategy::kEvolution;
  if (name == "rl") return SearchStrategy::kRl;
  throw Error(ErrorKind::kConfig, "unknown search strategy '" + name + "'");
}

void SearchConfig::check() const {
  if (iterations < 1) throw invalid_argument("search: iterations must be >= 1");
  if (samples < 1 || top_k < 0 || top_k > samples) {
    throw invalid_argument("search: need 0 <= top_k <= samples and samples >= 1");
  }
  if (population < 1 || max_population < population) {
    throw invalid_argument("search: need 1 <= population <= max_population");
  }
  if (!(policy_lr > 0.0) || baseline_decay < 0.0 || baseline_decay >= 1.0) {
    throw invalid_argument("search: policy_lr > 0 and baseline_decay in [0, 1) required");
  }
}

SearchDomain domain_from_table(const BenchmarkTable& table) {
  SearchDomain d{table.space(), {}};
  for (const auto& r : table.records()) d.population.push_back(r.graph);
  return d;
}

bool CandidatePool::add(PoolEntry entry) {
  if (!index_.insert(entry.hash).second) return false;
  entries_.push_back(std::move(entry));
  return true;
}

CategoricalPolicy::CategoricalPolicy(int sites, int choices)
    : choices_(choices), logits_(sites, std::vector<double>(choices, 0.0)) {
  if (sites < 1 || choices < 1) throw invalid_argument("policy needs sites and choices");
}

std::vector<double> CategoricalPolicy::probabilities(int site) const {
  const auto& l = logits_.at(site);
  const double top = *std::max_element(l.begin(), l.end());
  std::vector<double> p(l.size());
  double total = 0.0;
  for (std::size_t j = 0; j < l.size(); ++j) total += p[j] = std::exp(l[j] - top);
  for (double& x : p) x /= total;
  return p;
}

std::vector<int> CategoricalPolicy::sample(Rng& rng) const {
  std::vector<int> out;
  for (int s = 0; s < sites(); ++s) {
    const auto p = probabilities(s);
    std::discrete_distribution<int> dist(p.begin(), p.end());
    out.push_back(dist(rng));
  }
  return out;
}

double CategoricalPolicy::log_prob(std::span<const int> choices) const {
  double lp = 0.0;
  for (std::size_t s = 0; s < choices.size(); ++s) {
    lp += std::log(probabilities(static_cast<int>(s))[choices[s]]);
  }
  return lp;
}

double CategoricalPolicy::entropy() const {
  double h = 0.0;
  for (int s = 0; s < sites(); ++s) {
    for (double p : probabilities(s)) {
      if (p > 0.0) h -= p * std::log(p);
    }
  }
  return h;
}

void CategoricalPolicy::update(std::span<const std::vector<int>> choices,
                               std::span<const double> advantages, double lr) {
  if (choices.size() != advantages.size()) throw invalid_argument("policy update: size mismatch");
  if (choices.empty()) return;
  std::vector<std::vector<double>> grad(logits_.size(), std::vector<double>(choices_, 0.0));
  for (std::size_t k = 0; k < choices.size(); ++k) {
    for (std::size_t s = 0; s < choices[k].size(); ++s) {
      const auto p = probabilities(static_cast<int>(s));
      for (int j = 0; j < choices_; ++j) {
        grad[s][j] += advantages[k] * ((j == choices[k][s] ? 1.0 : 0.0) - p[j]);
      }
    }
  }
  const double scale = lr / static_cast<double>(choices.size());
  for (std::size_t s = 0; s < logits_.size(); ++s) {
    for (int j = 0; j < choices_; ++j) logits_[s][j] += scale * grad[s][j];
  }
}

SearchReport random_search(const SearchDomain& domain, const ScoreFn& predictor,
                           const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng) {
  cfg.check();
  SearchReport report;
  report.strategy = SearchStrategy::kRandom;
  CandidatePool pool;
  UniformSampler sampler(domain);
  for (int t = 1; t <= cfg.iterations; ++t) {
    const auto batch = sampler.draw(cfg.samples, rng);
    const auto scores = predict_checked(predictor, batch);
    const auto hashes = hashes_of(batch);
    std::vector<PoolEntry> kept;
    for (std::size_t i : top_k_indices(scores, cfg.top_k)) {
      PoolEntry e{batch[i], hashes[i], scores[i], std::nullopt, t, report.strategy, std::nullopt};
      if (pool.add(e)) kept.push_back(std::move(e));
    }
    report.log.push_back({{"t", t},
                          {"sampled", batch.size()},
                          {"kept", hex_list(kept)},
                          {"best_predicted", *std::max_element(scores.begin(), scores.end())}});
  }
  finalize(report, pool, evaluator);
  return report;
}

SearchReport evolution_search(const SearchDomain& domain, const ScoreFn& predictor,
                              const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng) {
  cfg.check();
  SearchReport report;
  report.strategy = SearchStrategy::kEvolution;
  CandidatePool pool;

  std::unordered_map<Digest, std::size_t> member_index;
  if (domain.closed()) {
    for (std::size_t i = 0; i < domain.population.size(); ++i) {
      member_index.emplace(canonical_hash(domain.population[i]), i);
    }
  }
  // Mutation stays inside the population when the domain is closed.
  // Neighbour lists are cached per parent.
  std::unordered_map<Digest, std::vector<CellGraph>> admissible_cache;
  auto mutate_in_domain = [&](const CellGraph& parent,
                              const Digest& parent_hash) -> std::optional<CellGraph> {
    auto it = admissible_cache.find(parent_hash);
    if (it == admissible_cache.end()) {
      std::vector<CellGraph> admissible;
      for (auto& n : single_edit_neighbors(domain.space, parent)) {
        if (!domain.closed() || member_index.contains(canonical_hash(n))) {
          admissible.push_back(std::move(n));
        }
      }
      it = admissible_cache.emplace(parent_hash, std::move(admissible)).first;
    }
    const auto& admissible = it->second;
    if (admissible.empty()) return std::nullopt;
    return relabel_topological(admissible[uniform_index(rng, admissible.size())]);
  };

  struct Individual {
    CellGraph graph;
    Digest hash;
  };
  std::deque<Individual> population;
  UniformSampler sampler(domain);
  for (auto& g : sampler.draw(cfg.population, rng)) {
    const Digest h = canonical_hash(g);
    report.initial_population.push_back(h);
    population.push_back({std::move(g), h});
  }

  for (int t = 1; t <= cfg.iterations; ++t) {
    std::vector<CellGraph> children;
    std::vector<Digest> child_hashes;
    std::vector<Digest> parents;
    std::unordered_set<Digest> batch_seen;
    long attempts = static_cast<long>(cfg.samples) * kAttemptsPerSample;
    // N^t is a ceiling: a sparse closed domain may offer fewer unseen
    // single-edit children than requested.
    while (static_cast<int>(children.size()) < cfg.samples) {
      if (attempts-- <= 0) {
        if (!children.empty()) break;
        throw SearchExhausted("evolution: no unseen child reachable by a single edit");
      }
      const Individual& parent = population[uniform_index(rng, population.size())];
      auto child = mutate_in_domain(parent.graph, parent.hash);
      if (!child) continue;
      const Digest h = canonical_hash(*child);
      if (pool.contains(h) || !batch_seen.insert(h).second) continue;
      children.push_back(std::move(*child));
      child_hashes.push_back(h);
      parents.push_back(parent.hash);
    }
    const auto scores = predict_checked(predictor, children);
    std::vector<PoolEntry> kept;
    for (std::size_t i : top_k_indices(scores, cfg.top_k)) {
      PoolEntry e{children[i], child_hashes[i], scores[i], std::nullopt, t, report.strategy,
                  parents[i]};
      if (pool.add(e)) {
        population.push_back({children[i], child_hashes[i]});
        kept.push_back(std::move(e));
      }
    }
    while (static_cast<int>(population.size()) > cfg.max_population) population.pop_front();
    report.log.push_back({{"t", t},
                          {"sampled", children.size()},
                          {"kept", hex_list(kept)},
                          {"best_predicted", *std::max_element(scores.begin(), scores.end())},
                          {"population", population.size()}});
  }
  finalize(report, pool, evaluator);
  return report;
}

SearchReport rl_search(const SearchDomain& domain, const ScoreFn& predictor,
                       const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng) {
  cfg.check();
  SearchReport report;
  report.strategy = SearchStrategy::kRl;
  CandidatePool pool;
  const SearchSpaceSpec& space = domain.space;
  CategoricalPolicy policy(policy_sites(space), static_cast<int>(space.vocabulary.size()));

  std::vector<std::vector<int>> member_choices;
  std::vector<Digest> member_hashes;
  if (domain.closed()) {
    for (const auto& g : domain.population) {
      member_choices.push_back(site_choices(space, g));
      member_hashes.push_back(canonical_hash(g));
    }
  }

  std::optional<double> baseline;
  for (int t = 1; t <= cfg.iterations; ++t) {
    std::vector<CellGraph> batch;
    std::vector<Digest> hashes;
    std::unordered_set<Digest> batch_seen;
    if (domain.closed()) {
      // The policy restricted to the population: weight ∝ pi(a).
      std::vector<double> weights(domain.population.size(), 0.0);
      std::size_t available = 0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (pool.contains(member_hashes[i])) continue;
        weights[i] = std::exp(policy.log_prob(member_choices[i]));
        ++available;
      }
      if (available < static_cast<std::size_t>(cfg.samples)) {
        throw SearchExhausted("rl: search space exhausted");
      }
      for (int k = 0; k < cfg.samples; ++k) {
        std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
        const std::size_t pick = dist(rng);
        weights[pick] = 0.0;
        batch.push_back(domain.population[pick]);
        hashes.push_back(member_hashes[pick]);
      }
    } else {
      long attempts = static_cast<long>(cfg.samples) * kAttemptsPerSample;
      while (static_cast<int>(batch.size()) < cfg.samples) {
        if (attempts-- <= 0) throw SearchExhausted("rl: could not sample enough distinct cells");
        CellGraph g = apply_choices(space, sample_uniform(space, rng), policy.sample(rng));
        const Digest h = canonical_hash(g);
        if (pool.contains(h) || !batch_seen.insert(h).second) continue;
        batch.push_back(std::move(g));
        hashes.push_back(h);
      }
    }

    const auto scores = predict_checked(predictor, batch);
    const auto top = top_k_indices(scores, cfg.top_k);
    std::vector<PoolEntry> kept;
    std::vector<std::vector<int>> top_choices;
    double reward = 0.0;
    for (std::size_t i : top) {
      reward += scores[i] / static_cast<double>(top.size());
      top_choices.push_back(site_choices(space, batch[i]));
      PoolEntry e{batch[i], hashes[i], scores[i], std::nullopt, t, report.strategy, std::nullopt};
      if (pool.add(e)) kept.push_back(std::move(e));
    }
    if (!baseline) {
      baseline = std::accumulate(scores.begin(), scores.end(), 0.0) /
                 static_cast<double>(scores.size());
    }
    if (!top.empty()) {
      const std::vector<double> advantages(top.size(), reward - *baseline);
      policy.update(top_choices, advantages, cfg.policy_lr);
      *baseline = cfg.baseline_decay * *baseline + (1.0 - cfg.baseline_decay) * reward;
    }
    report.log.push_back({{"t", t},
                          {"sampled", batch.size()},
                          {"kept", hex_list(kept)},
                          {"best_predicted", *std::max_element(scores.begin(), scores.end())},
                          {"reward", reward},
                          {"policy_entropy", policy.entropy()}});
  }
  finalize(report, pool, evaluator);
  return report;
}

SearchReport run_search(const SearchDomain& domain, const ScoreFn& predictor,
                        const Evaluator& evaluator, const SearchConfig& cfg, Rng& rng) {
  switch (cfg.strategy) {
    case SearchStrategy::kRandom: return random_search(domain, predictor, evaluator, cfg, rng);
    case SearchStrategy::kEvolution:
      return evolution_search(domain, predictor, evaluator, cfg, rng);
    case SearchStrategy::kRl: return rl_search(domain, predictor, evaluator, cfg, rng);
  }
  throw invalid_argument("unknown strategy");
}

SearchReport random_sampling_baseline(const SearchDomain& domain, const Evaluator& evaluator,
                                      int budget, Rng& rng) {
  if (budget < 1) throw invalid_argument("baseline budget must be positive");
  SearchReport report;
  CandidatePool pool;
  UniformSampler sampler(domain);
  for (auto& g : sampler.draw(budget, rng)) {
    const Digest h = canonical_hash(g);
    pool.add({std::move(g), h, 0.0, std::nullopt, 0, SearchStrategy::kRandom, std::nullopt});
  }
  finalize(report, pool, evaluator);
  return report;
}

nlohmann::json to_json(const PoolEntry& e) {
  nlohmann::json j = {{"hash", e.hash.hex()},
                      {"graph", e.graph},
                      {"predicted", e.predicted},
                      {"iteration", e.iteration},
                      {"strategy", to_string(e.strategy)}};
  j["truth"] = e.truth ? nlohmann::json(*e.truth) : nlohmann::json(nullptr);
  j["parent"] = e.parent ? nlohmann::json(e.parent->hex()) : nlohmann::json(nullptr);
  return j;
}

std::string search_log_jsonl(const SearchReport& report) {
  std::ostringstream out;
  for (const auto& line : report.log) out << line.dump() << '\n';
  return out.str();
}

}  // namespace dclp
