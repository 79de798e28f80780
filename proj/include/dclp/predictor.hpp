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

#include <span>
#include <string>
#include <vector>

#include "dclp/cellgraph.hpp"
#include "dclp/neuralcore.hpp"

namespace dclp {

struct LabeledSample {
  CellGraph graph;
  double accuracy = 0.0;
};

enum class LossKind { kMse, kMseNorm, kListMle };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct FinetuneConfig {
  LossKind loss = LossKind::kListMle;
  double lr = 0.005;
  int max_epochs = 200;
  int patience = 20;
  double min_delta = 1e-5;
  int head_hidden = 128;
  bool freeze_encoder = false;
  // Fraction of labels held out to drive early stopping instead of the
  // training loss. Zero keeps every label for training.
  double holdout_fraction = 0.0;

  void check() const;
};

// max(4, ceil(n / 5)).
int finetune_batch_size(std::size_t labeled);

struct ZScore {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 1.0;
};

// Population standard deviation. Throws on fewer than two labels or zero
// variance.
ZScore zscore_normalize(std::span<const double> labels);

struct LossAndGrad {
  double loss = 0.0;
  nn::Vector grad;  // d loss / d scores
};

// Negative log-likelihood of `order` under the Plackett-Luce model:
// -sum_i log(exp(s[o_i]) / sum_{j >= i} exp(s[o_j])).
LossAndGrad listmle_loss(std::span<const double> scores, std::span<const int> order);

// Mean squared error.
LossAndGrad mse_loss(std::span<const double> scores, std::span<const double> targets);

// Descending by accuracy; ties broken by canonical hash.
std::vector<int> true_order(std::span<const double> accuracies,
                            std::span<const Digest> hashes);

struct Predictor {
  nn::EncoderParams encoder;
  nn::MlpHead head;
  LossKind loss = LossKind::kListMle;
  std::vector<std::string> vocabulary;  // encoding vocabulary
  bool normalized = false;
  double label_mean = 0.0;
  double label_std = 1.0;

  double denormalize(double raw) const {
    return normalized ? label_mean + label_std * raw : raw;
  }
};

struct FinetuneTrace {
  std::vector<double> epoch_losses;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int best_epoch = 0;
  int batch_size = 0;
  int optimizer_steps = 0;
};

struct FinetuneResult {
  Predictor predictor;
  FinetuneTrace trace;
};

FinetuneResult finetune(const nn::EncoderParams& encoder, std::span<const LabeledSample> labeled,
                        const FinetuneConfig& cfg, std::span<const std::string> vocabulary,
                        Rng& rng);

// Raw head outputs, one per graph.
std::vector<double> predict(const Predictor& predictor, std::span<const CellGraph> graphs);

nlohmann::json to_json(const Predictor& p);
Predictor predictor_from_json(const nlohmann::json& j);

}  // namespace dclp
