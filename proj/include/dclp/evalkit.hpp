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


// Ranking metrics and experiment reports.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

namespace dclp {

// Tie-corrected Kendall tau-b, O(n log n). Throws when either side is
// entirely tied or lengths differ / are below two.
double kendall_tau(std::span<const double> pred, std::span<const double> truth);

// Pair counts behind tau-b; exposed for testing.
struct KendallCounts {
  std::int64_t n0 = 0;         // n (n - 1) / 2
  std::int64_t ties_x = 0;     // pairs tied on pred
  std::int64_t ties_y = 0;     // pairs tied on truth
  std::int64_t ties_xy = 0;    // tied on both
  std::int64_t discordant = 0;

  std::int64_t concordant_minus_discordant() const {
    return n0 - ties_x - ties_y + ties_xy - 2 * discordant;
  }
};

KendallCounts kendall_counts(std::span<const double> pred, std::span<const double> truth);
double tau_b_from_counts(std::int64_t c_minus_d, std::int64_t pairs_untied_x,
                         std::int64_t pairs_untied_y);

// 100 * (number strictly better than `chosen`) / population size.
double percentile_rank(std::span<const double> population, double chosen);

struct RankReport {
  double tau = 0.0;
  std::size_t n = 0;
  std::optional<double> percentile;
  int query_budget = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  double wall_time = 0.0;

  void check() const;
};

nlohmann::json to_json(const RankReport& r);

// "pred_rank,true_rank" rows, ranks 1-based (1 = best, average rank on ties).
std::string rank_scatter_csv(std::span<const double> pred, std::span<const double> truth);

// Average ranks, descending (largest value gets rank 1).
std::vector<double> descending_ranks(std::span<const double> values);

double median(std::vector<double> values);

}  // namespace dclp
