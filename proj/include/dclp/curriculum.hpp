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

// Difficulty-preference schedule for picking positives.
//
// The preference temperature follows a tanh-shaped trend from tau_start
// towards tau_end with a sinusoidal fluctuation, so training periodically
// revisits easier positives:
//
//   u_t     = (t/T) * sigma + (sigma/k) * sin(n * pi * t / T)
//   tau_t   = (tau_end - tau_mid) / sigma * tanh(atanh(u_t)) + tau_mid
//   tau_mid = (tau_start + tau_end) / 2
//
// A candidate with difficulty L is then chosen with probability
// softmax(tau_t * L). Negative tau_t favours easy positives, positive tau_t
// favours hard ones.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dclp/augment.hpp"
#include "dclp/common.hpp"

namespace dclp {

enum class SelectionMode { kArgmax, kStochastic };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& name);

struct CurriculumConfig {
  double tau_start = -1.0;
  double tau_end = 1.0;
  double sigma = 0.9;
  double frequency = 2.0;  // n
  double amplitude = 4.0;  // k
  int total_steps = 1;     // T
  SelectionMode selection_mode = SelectionMode::kArgmax;

  // u_t is clamped to this magnitude before atanh.
  static constexpr double kClamp = 0.999;

  double tau_mid() const { return 0.5 * (tau_start + tau_end); }
  void check() const;
};

// Pre-clamp argument of atanh at step t.
double schedule_argument(const CurriculumConfig& cfg, int t);

// Literal composition tanh(atanh(clamp(u_t))) form.
double temperature(const CurriculumConfig& cfg, int t);

// Linear-plus-sinusoid form, equal to temperature() whenever no clamping.
double temperature_closed_form(const CurriculumConfig& cfg, int t);

// softmax(tau_t * difficulties) with max subtraction.
std::vector<double> selection_probabilities(const CurriculumConfig& cfg, int t,
                                            std::span<const double> difficulties);

// Same, for an explicit temperature.
std::vector<double> softmax_scaled(double tau, std::span<const double> values);

std::size_t select(const CurriculumConfig& cfg, int t,
                   std::span<const double> difficulties, Rng& rng);

std::size_t select(const CurriculumConfig& cfg, int t,
                   std::span<const AugmentedGraph> candidates, Rng& rng);

}  // namespace dclp
