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

#include "dclp/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dclp/difficulty.hpp"

namespace dclp {

std::string to_string(SelectionMode mode) {
  return mode == SelectionMode::kArgmax ? "argmax" : "stochastic";
}

SelectionMode selection_mode_from_string(const std::string& name) {
  if (name == "argmax") return SelectionMode::kArgmax;
  if (name == "stochastic") return SelectionMode::kStochastic;
  throw Error(ErrorKind::kConfig, "unknown selection mode '" + name + "'");
}

void CurriculumConfig::check() const {
  if (total_steps < 1) throw invalid_argument("curriculum total_steps must be >= 1");
  if (!(frequency > 1.0)) throw invalid_argument("curriculum frequency n must be > 1");
  if (!(amplitude > 1.0)) throw invalid_argument("curriculum amplitude k must be > 1");
  if (!(sigma > 0.0 && sigma < 1.0)) throw invalid_argument("curriculum sigma must lie in (0, 1)");
}

double schedule_argument(const CurriculumConfig& cfg, int t) {
  const double frac = static_cast<double>(t) / cfg.total_steps;
  return frac * cfg.sigma +
         cfg.sigma / cfg.amplitude * std::sin(cfg.frequency * std::numbers::pi * frac);
}

double temperature(const CurriculumConfig& cfg, int t) {
  const double u = std::clamp(schedule_argument(cfg, t), -CurriculumConfig::kClamp,
                              CurriculumConfig::kClamp);
  const double sigma_t = std::atanh(u);
  return (cfg.tau_end - cfg.tau_mid()) / cfg.sigma * std::tanh(sigma_t) + cfg.tau_mid();
}

double temperature_closed_form(const CurriculumConfig& cfg, int t) {
  const double frac = static_cast<double>(t) / cfg.total_steps;
  return (cfg.tau_end - cfg.tau_mid()) *
             (frac + std::sin(cfg.frequency * std::numbers::pi * frac) / cfg.amplitude) +
         cfg.tau_mid();
}

std::vector<double> softmax_scaled(double tau, std::span<const double> values) {
  std::vector<double> p(values.size());
  if (values.empty()) return p;
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, tau * v);
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    p[i] = std::exp(tau * values[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> selection_probabilities(const CurriculumConfig& cfg, int t,
                                            std::span<const double> difficulties) {
  if (difficulties.empty()) throw invalid_argument("selection needs at least one candidate");
  return softmax_scaled(temperature(cfg, t), difficulties);
}

std::size_t select(const CurriculumConfig& cfg, int t, std::span<const double> difficulties,
                   Rng& rng) {
  if (cfg.selection_mode == SelectionMode::kArgmax) {
    if (difficulties.empty()) throw invalid_argument("selection needs at least one candidate");
    // Softmax is monotone, so compare logits directly; ties go to the lowest
    // index.
    const double tau = temperature(cfg, t);
    std::size_t best = 0;
    for (std::size_t i = 1; i < difficulties.size(); ++i) {
      if (tau * difficulties[i] > tau * difficulties[best]) best = i;
    }
    return best;
  }
  const auto p = selection_probabilities(cfg, t, difficulties);
  std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
  return dist(rng);
}

std::size_t select(const CurriculumConfig& cfg, int t,
                   std::span<const AugmentedGraph> candidates, Rng& rng) {
  std::vector<double> d;
  d.reserve(candidates.size());
  for (const auto& c : candidates) d.push_back(edit_difficulty(c).value);
  return select(cfg, t, d, rng);
}

}  // namespace dclp
