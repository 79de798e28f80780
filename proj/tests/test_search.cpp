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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dclp/search.hpp"
#include "oracles.hpp"

using namespace dclp;

namespace {

const auto kSpace = SearchSpaceSpec::nb101();

struct Fixture {
  SyntheticOracle oracle = SyntheticOracle::for_space(kSpace, 0);
  BenchmarkTable table;
  SearchDomain domain;

  Fixture() : table(make()) { domain = domain_from_table(table); }

  BenchmarkTable make() {
    Rng rng(100);
    return synthetic_table(kSpace, oracle, 4096, rng);
  }
  Evaluator truth(int* calls = nullptr) const {
    return [this, calls](const CellGraph& g) {
      if (calls) ++*calls;
      return lookup_performance(table, g);
    };
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Predictor with the oracle's ordering, blurred by a deterministic hash term.
ScoreFn noisy_oracle(const SyntheticOracle& o, double blur) {
  return [o, blur](std::span<const CellGraph> graphs) {
    std::vector<double> out;
    for (const auto& g : graphs) {
      const double u = static_cast<double>(splitmix64(canonical_hash(g).value) >> 11) * 0x1.0p-53;
      out.push_back(synthetic_performance(o, g) + blur * (u - 0.5));
    }
    return out;
  };
}

SearchConfig small(SearchStrategy s) {
  SearchConfig c;
  c.strategy = s;
  c.iterations = 5;
  c.samples = 40;
  c.top_k = 4;
  return c;
}

const SearchStrategy kAll[] = {SearchStrategy::kRandom, SearchStrategy::kEvolution,
                               SearchStrategy::kRl};

}  // namespace

TEST_CASE("strategy names and config checks") {
  for (auto s : kAll) CHECK(search_strategy_from_string(to_string(s)) == s);
  CHECK_THROWS(search_strategy_from_string("bayes"));
  SearchConfig c;
  CHECK(c.query_budget() == 50);
  c.check();
  c.top_k = 101;
  CHECK_THROWS(c.check());
  c = SearchConfig{};
  c.iterations = 0;
  CHECK_THROWS(c.check());
  c = SearchConfig{};
  c.max_population = 5;
  CHECK_THROWS(c.check());
}

TEST_CASE("candidate pool deduplicates by hash") {
  CandidatePool pool;
  const CellGraph g = make_oon({"input", "conv3x3-bn-relu", "output"}, {{0, 1}, {1, 2}});
  CHECK(pool.add({g, canonical_hash(g), 0.1, {}, 1, SearchStrategy::kRandom, {}}));
  CHECK_FALSE(pool.add({g, canonical_hash(g), 0.9, {}, 2, SearchStrategy::kRandom, {}}));
  CHECK(pool.size() == 1);
  CHECK(pool.entries()[0].predicted == 0.1);
  CHECK(pool.contains(canonical_hash(g)));
}

TEST_CASE("categorical policy basics") {
  CategoricalPolicy p(3, 4);
  for (int s = 0; s < 3; ++s) {
    for (double q : p.probabilities(s)) CHECK(q == doctest::Approx(0.25));
  }
  CHECK(p.entropy() == doctest::Approx(3 * std::log(4.0)));
  CHECK(p.log_prob(std::vector<int>{0, 1, 2}) == doctest::Approx(3 * std::log(0.25)));
  CHECK(p.log_prob(std::vector<int>{0}) == doctest::Approx(std::log(0.25)));
  Rng rng(1);
  CHECK(p.sample(rng).size() == 3);
}

TEST_CASE("policy update follows the score-function gradient") {
  // The update adds lr * grad of mean_k A_k log pi(c_k); check it against
  // finite differences of that objective in logit space.
  CategoricalPolicy p(2, 3);
  const std::vector<std::vector<int>> seed_choices{{0, 2}, {1, 1}};
  p.update(seed_choices, std::vector<double>{0.7, -0.3}, 1.0);  // non-uniform start
  const std::vector<std::vector<int>> choices{{2, 0}, {2, 1}, {0, 0}};
  const std::vector<double> adv{0.5, 1.5, -1.0};
  auto objective = [&](const CategoricalPolicy& q) {
    double v = 0.0;
    for (std::size_t k = 0; k < choices.size(); ++k) v += adv[k] * q.log_prob(choices[k]);
    return v / static_cast<double>(choices.size());
  };
  // One tiny step: change in objective ~ lr * |grad|^2 > 0.
  CategoricalPolicy q = p;
  q.update(choices, adv, 1e-4);
  CHECK(objective(q) > objective(p));
  // From uniform, one update gives logits lr * mean_k A_k (e_{c_k} - 1/n).
  CategoricalPolicy u(1, 3);
  u.update(std::vector<std::vector<int>>{{0}, {2}}, std::vector<double>{2.0, -1.0}, 0.3);
  const double l0 = 0.3 * (2.0 * (1 - 1.0 / 3) - 1.0 * (0 - 1.0 / 3)) / 2;
  const double l1 = 0.3 * (2.0 * (0 - 1.0 / 3) - 1.0 * (0 - 1.0 / 3)) / 2;
  const double l2 = 0.3 * (2.0 * (0 - 1.0 / 3) - 1.0 * (1 - 1.0 / 3)) / 2;
  const double z = std::exp(l0) + std::exp(l1) + std::exp(l2);
  const auto probs = u.probabilities(0);
  CHECK(probs[0] == doctest::Approx(std::exp(l0) / z).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(std::exp(l1) / z).epsilon(1e-12));
  CHECK(probs[2] == doctest::Approx(std::exp(l2) / z).epsilon(1e-12));
  CHECK_THROWS(p.update(choices, std::vector<double>{1.0}, 0.1));
}

TEST_CASE("bandit: REINFORCE learns the rewarded choice") {
  CategoricalPolicy p(1, 2);
  Rng rng(2);
  double baseline = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto c = p.sample(rng);
    const double reward = c[0] == 0 ? 1.0 : 0.0;  // choice A is index 0
    p.update(std::vector<std::vector<int>>{c}, std::vector<double>{reward - baseline}, 0.5);
    baseline = 0.9 * baseline + 0.1 * reward;
  }
  CHECK(p.probabilities(0)[0] > 0.9);
}

TEST_CASE("a perfect predictor over a fully sampled space finds the optimum") {
  const auto space = testing::small_oon_space(4, 5);
  std::vector<CellGraph> all;
  enumerate(space, 0, [&](const CellGraph& g) {
    all.push_back(g);
    return true;
  });
  REQUIRE(all.size() > 10);
  const auto oracle = SyntheticOracle::for_space(space, 3);
  SearchDomain domain{space, all};
  Evaluator truth = [&](const CellGraph& g) { return synthetic_performance(oracle, g); };
  SearchConfig cfg;
  cfg.iterations = 1;
  cfg.samples = static_cast<int>(all.size());
  cfg.top_k = 1;
  Rng rng(3);
  const auto r = random_search(domain, noisy_oracle(oracle, 0.0), truth, cfg, rng);
  double best = 0.0;
  for (const auto& g : all) best = std::max(best, truth(g));
  REQUIRE(r.best);
  CHECK(*r.best->truth == best);
  CHECK(r.queries == 1);
}

TEST_CASE("query budget and no repeated ground-truth evaluation") {
  const auto& f = fixture();
  for (auto s : kAll) {
    CAPTURE(to_string(s));
    for (bool closed : {true, false}) {
      int calls = 0;
      std::unordered_set<Digest> evaluated;
      Evaluator ev = [&](const CellGraph& g) {
        ++calls;
        CHECK(evaluated.insert(canonical_hash(g)).second);
        return closed ? lookup_performance(f.table, g) : synthetic_performance(f.oracle, g);
      };
      const SearchDomain domain = closed ? f.domain : SearchDomain{kSpace, {}};
      Rng rng(4);
      const auto r = run_search(domain, noisy_oracle(f.oracle, 0.05), ev, small(s), rng);
      CHECK(r.queries == calls);
      CHECK(r.queries <= small(s).query_budget());
      CHECK(r.queries == static_cast<int>(r.pool.size()));
      CHECK(r.log.size() == 5);
      REQUIRE(r.best);
      for (const auto& e : r.pool) CHECK(*e.truth <= *r.best->truth);
      for (const auto& e : r.pool) {
        CHECK(validate(e.graph, kSpace.vocabulary).ok());
        CHECK(e.strategy == s);
        if (closed) CHECK(f.table.contains(e.graph));
      }
    }
  }
}

TEST_CASE("search is deterministic per seed") {
  const auto& f = fixture();
  for (auto s : kAll) {
    Rng a(5), b(5);
    const auto ra = run_search(f.domain, noisy_oracle(f.oracle, 0.05), f.truth(), small(s), a);
    const auto rb = run_search(f.domain, noisy_oracle(f.oracle, 0.05), f.truth(), small(s), b);
    CHECK(ra.best->hash == rb.best->hash);
    CHECK(search_log_jsonl(ra) == search_log_jsonl(rb));
  }
}

TEST_CASE("evolution with K = 0 never changes the population") {
  const auto& f = fixture();
  auto cfg = small(SearchStrategy::kEvolution);
  cfg.top_k = 0;
  Rng rng(6);
  const auto r = evolution_search(f.domain, noisy_oracle(f.oracle, 0.05), f.truth(), cfg, rng);
  CHECK(r.initial_population.size() == 10);
  for (const auto& line : r.log) {
    CHECK(line["population"] == 10);
    CHECK(line["kept"].empty());
  }
  CHECK(r.queries == 0);
  CHECK_FALSE(r.best);
}

TEST_CASE("evolution provenance: every pool member descends from the initial population") {
  const auto& f = fixture();
  for (bool closed : {true, false}) {
    auto cfg = small(SearchStrategy::kEvolution);
    cfg.iterations = 8;
    cfg.max_population = 12;
    Rng rng(7);
    const SearchDomain domain = closed ? f.domain : SearchDomain{kSpace, {}};
    Evaluator ev = [&](const CellGraph& g) { return synthetic_performance(f.oracle, g); };
    const auto r = evolution_search(domain, noisy_oracle(f.oracle, 0.05), ev, cfg, rng);
    std::unordered_map<Digest, const PoolEntry*> by_hash;
    for (const auto& e : r.pool) by_hash[e.hash] = &e;
    const std::unordered_set<Digest> roots(r.initial_population.begin(), r.initial_population.end());
    for (const auto& e : r.pool) {
      const PoolEntry* cur = &e;
      int depth = 0;
      while (true) {
        REQUIRE(cur->parent);
        const Digest p = *cur->parent;
        if (roots.contains(p)) break;
        REQUIRE(by_hash.contains(p));
        CHECK(by_hash[p]->iteration < cur->iteration);
        cur = by_hash[p];
        REQUIRE(++depth < 100);
      }
    }
    for (const auto& line : r.log) CHECK(line["population"] <= 12);
  }
}

TEST_CASE("RL entropy trends down and closed sampling avoids the pool") {
  const auto& f = fixture();
  auto cfg = small(SearchStrategy::kRl);
  cfg.iterations = 40;
  cfg.samples = 30;
  cfg.top_k = 3;
  for (bool closed : {false, true}) {
    Rng rng(8);
    const SearchDomain domain = closed ? f.domain : SearchDomain{kSpace, {}};
    Evaluator ev = [&](const CellGraph& g) { return synthetic_performance(f.oracle, g); };
    const auto r = rl_search(domain, noisy_oracle(f.oracle, 0.0), ev, cfg, rng);
    double ema = r.log.front()["policy_entropy"].get<double>();
    double prev = ema + 1.0;
    int rises = 0;
    for (const auto& line : r.log) {
      ema = 0.9 * ema + 0.1 * line["policy_entropy"].get<double>();
      if (ema > prev + 1e-12) ++rises;
      prev = ema;
      CHECK(line.contains("reward"));
    }
    CHECK(rises == 0);
    CHECK(r.log.back()["policy_entropy"].get<double>() < 5 * std::log(3.0));
    std::unordered_set<Digest> seen;
    for (const auto& e : r.pool) CHECK(seen.insert(e.hash).second);
  }
}

TEST_CASE("exhausted domains are reported") {
  const auto& f = fixture();
  SearchDomain tiny{kSpace, {f.domain.population.begin(), f.domain.population.begin() + 50}};
  for (auto s : {SearchStrategy::kRandom, SearchStrategy::kRl}) {
    Rng rng(9);
    CHECK_THROWS_AS(run_search(tiny, noisy_oracle(f.oracle, 0.05), f.truth(), small(s), rng),
                    SearchExhausted);
  }
  Rng rng(10);
  CHECK_THROWS_AS(random_sampling_baseline(tiny, f.truth(), 51, rng), SearchExhausted);
}

TEST_CASE("random-sampling baseline and logs") {
  const auto& f = fixture();
  Rng rng(11);
  int calls = 0;
  const auto b = random_sampling_baseline(f.domain, f.truth(&calls), 50, rng);
  CHECK(b.queries == 50);
  CHECK(calls == 50);
  Rng rng2(12);
  const auto r = random_search(f.domain, noisy_oracle(f.oracle, 0.05), f.truth(), small(SearchStrategy::kRandom), rng2);
  std::istringstream in(search_log_jsonl(r));
  std::string line;
  int t = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["t"] == ++t);
    CHECK(j["sampled"] == 40);
    CHECK(j["kept"].size() <= 4);
  }
  CHECK(t == 5);
  const auto j = to_json(r.pool.front());
  CHECK(j["truth"].is_number());
  CHECK(j["parent"].is_null());
}
