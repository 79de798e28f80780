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


#include "dclp/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "dclp/common.hpp"

namespace dclp {

namespace {

std::int64_t tied_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Merge sort on `ys`, returning the number of inversions.
std::int64_t count_inversions(std::vector<double>& ys, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(ys, scratch, lo, mid) +
                       count_inversions(ys, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (ys[j] < ys[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = ys[j++];
    } else {
      scratch[k++] = ys[i++];
    }
  }
  while (i < mid) scratch[k++] = ys[i++];
  while (j < hi) scratch[k++] = ys[j++];
  std::copy(scratch.begin() + lo, scratch.begin() + hi, ys.begin() + lo);
  return swaps;
}

}  // namespace

KendallCounts kendall_counts(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw invalid_argument("kendall_tau: length mismatch");
  if (pred.size() < 2) throw invalid_argument("kendall_tau: need at least two samples");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::isnan(pred[i]) || std::isnan(truth[i])) {
      throw invalid_argument("kendall_tau: NaN score");
    }
  }
  const std::size_t n = pred.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (pred[a] != pred[b]) return pred[a] < pred[b];
    return truth[a] < truth[b];
  });

  KendallCounts c;
  c.n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  std::int64_t run_x = 1, run_xy = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    const bool same_x = k < n && pred[idx[k]] == pred[idx[k - 1]];
    const bool same_xy = same_x && truth[idx[k]] == truth[idx[k - 1]];
    if (same_x) {
      ++run_x;
    } else {
      c.ties_x += tied_pairs(run_x);
      run_x = 1;
    }
    if (same_xy) {
      ++run_xy;
    } else {
      c.ties_xy += tied_pairs(run_xy);
      run_xy = 1;
    }
  }

  std::vector<double> ys(n), scratch(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = truth[idx[k]];
  c.discordant = count_inversions(ys, scratch, 0, n);

  std::int64_t run_y = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    if (k < n && ys[k] == ys[k - 1]) {
      ++run_y;
    } else {
      c.ties_y += tied_pairs(run_y);
      run_y = 1;
    }
  }
  return c;
}

double tau_b_from_counts(std::int64_t c_minus_d, std::int64_t pairs_untied_x,
                         std::int64_t pairs_untied_y) {
  if (pairs_untied_x == 0 || pairs_untied_y == 0) {
    throw invalid_argument("kendall_tau: all scores tied on one side");
  }
  const double denom = std::sqrt(static_cast<double>(pairs_untied_x)) *
                       std::sqrt(static_cast<double>(pairs_untied_y));
  return std::clamp(static_cast<double>(c_minus_d) / denom, -1.0, 1.0);
}

double kendall_tau(std::span<const double> pred, std::span<const double> truth) {
  const KendallCounts c = kendall_counts(pred, truth);
  return tau_b_from_counts(c.concordant_minus_discordant(), c.n0 - c.ties_x, c.n0 - c.ties_y);
}

double percentile_rank(std::span<const double> population, double chosen) {
  if (population.empty()) throw invalid_argument("percentile_rank: empty population");
  const auto better = std::count_if(population.begin(), population.end(),
                                    [&](double v) { return v > chosen; });
  return 100.0 * static_cast<double>(better) / static_cast<double>(population.size());
}

void RankReport::check() const {
  if (!(std::abs(tau) <= 1.0)) throw invalid_argument("RankReport: |tau| > 1");
  if (percentile && (*percentile < 0.0 || *percentile > 100.0)) {
    throw invalid_argument("RankReport: percentile outside [0, 100]");
  }
}

nlohmann::json to_json(const RankReport& r) {
  r.check();
  nlohmann::json j = {{"seed", r.seed},   {"config_digest", r.config_digest},
                      {"tau", r.tau},     {"n", r.n},
                      {"query_budget", r.query_budget}, {"wall_time", r.wall_time}};
  j["percentile"] = r.percentile ? nlohmann::json(*r.percentile) : nlohmann::json(nullptr);
  return j;
}

std::vector<double> descending_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < idx.size();) {
    std::size_t end = start + 1;
    while (end < idx.size() && values[idx[end]] == values[idx[start]]) ++end;
    const double avg = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[idx[k]] = avg;
    start = end;
  }
  return ranks;
}

std::string rank_scatter_csv(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw invalid_argument("rank_scatter_csv: length mismatch");
  const auto rp = descending_ranks(pred);
  const auto rt = descending_ranks(truth);
  std::ostringstream out;
  out.precision(17);
  out << "pred_rank,true_rank\n";
  for (std::size_t i = 0; i < rp.size(); ++i) out << rp[i] << ',' << rt[i] << '\n';
  return out.str();
}

double median(std::vector<double> values) {
  if (values.empty()) throw invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

}  // namespace dclp
