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

// Contrastive pre-training of the cell encoder.
//
// Similarities are RBF kernels over embeddings, s = exp(-|z1 - z2|^2 / 2s^2),
// and the objective is InfoNCE over temperature-scaled similarities. Each
// origin graph gets N augmented candidates; the curriculum picks one as the
// positive. Negatives are the other positives in the batch plus a FIFO
// memory bank of detached embeddings from earlier steps.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dclp/augment.hpp"
#include "dclp/cellgraph.hpp"
#include "dclp/curriculum.hpp"
#include "dclp/neuralcore.hpp"

namespace dclp {

// How the positive is picked among the candidates.
enum class PositiveSelection {
  kCurriculum,  // scheduled by CurriculumConfig
  kUniform,     // uniformly at random, no curriculum
};

std::string to_string(PositiveSelection s);
PositiveSelection positive_selection_from_string(const std::string& name);

struct ContrastiveConfig {
  double temperature = 0.2;
  double rbf_sigma = 1.0;
  int bank_capacity = 4096;
  int batch_size = 4096;
  int epochs = 50;
  double lr = 0.015;
  double momentum = 0.9;
  int candidates = 8;
  int hidden = 128;
  int layers = 3;
  PositiveSelection selection = PositiveSelection::kCurriculum;
  // Project embeddings onto the unit sphere before the RBF. Raw sum-aggregated
  // GIN embeddings have norms in the hundreds, where exp(-d / 2s^2) underflows.
  bool normalize_embeddings = true;

  // CPU-friendly overrides: batch 256, bank 1024.
  static ContrastiveConfig desk_scale();
  void check() const;
};

class MemoryBank {
 public:
  MemoryBank(int capacity, int width);

  // Stores a detached copy; evicts the oldest entry when full.
  void push(const Eigen::Ref<const nn::RowVector>& embedding, Digest origin);

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  std::size_t pushes() const { return pushes_; }
  // i-th oldest live entry.
  nn::RowVector entry(int i) const;
  Digest origin(int i) const;

 private:
  int slot(int i) const;

  int capacity_;
  int size_ = 0;
  int cursor_ = 0;
  std::size_t pushes_ = 0;
  nn::Matrix storage_;
  std::vector<Digest> origins_;
};

double rbf_similarity(const Eigen::Ref<const nn::RowVector>& a,
                      const Eigen::Ref<const nn::RowVector>& b, double sigma);

// InfoNCE from precomputed similarities, all terms exponentiated and
// stabilised with log-sum-exp.
double info_nce_from_similarities(double positive, std::span<const double> negatives,
                                  double tau);

// InfoNCE for one query; each row of `negatives` is one negative key.
double info_nce(const nn::RowVector& query, const nn::RowVector& positive,
                const nn::Matrix& negatives, double tau, double sigma);

struct ContrastiveBatchLoss {
  double loss = 0.0;
  nn::Matrix d_queries;
  nn::Matrix d_positives;
};

// Mean InfoNCE over the batch. Negatives for query i: positives j != i, and
// bank entries whose origin differs from origin i.
ContrastiveBatchLoss contrastive_batch_loss(const nn::Matrix& queries,
                                            const nn::Matrix& positives,
                                            std::span<const Digest> origins,
                                            const MemoryBank& bank, double tau, double sigma);

// Row-wise L2 normalisation and its backward pass (d_raw from d_unit).
nn::Matrix l2_normalize_rows(const nn::Matrix& z);
nn::Matrix l2_normalize_backward(const nn::Matrix& z, const nn::Matrix& d_unit);

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct SelectionRecord {
  int step = 0;
  double tau = 0.0;
  std::vector<double> difficulties;
  std::size_t chosen = 0;
};

struct PretrainResult {
  nn::EncoderParams params;
  std::vector<double> epoch_losses;
  std::vector<StepRecord> steps;
  std::vector<SelectionRecord> selections;  // filled when requested
  int optimizer_steps = 0;
  int skipped_origins = 0;  // no candidate could be augmented
};

struct PretrainOptions {
  bool log_selections = false;
  std::function<void(int epoch, const nn::EncoderParams&)> on_epoch_end;
};

// `ops` is the OON-level operation vocabulary used by attribute masking;
// `vocabulary` is the model encoding vocabulary.
PretrainResult pretrain(std::span<const CellGraph> unlabeled, nn::EncoderParams params,
                        CurriculumConfig curriculum, const ContrastiveConfig& cfg,
                        AugmentationSpec augmentation, std::span<const std::string> ops,
                        std::span<const std::string> vocabulary, Rng& rng,
                        const PretrainOptions& options = {});

// generate_candidates, one candidate at a time; candidates whose
// augmentation has no legal edit are dropped.
std::vector<AugmentedGraph> robust_candidates(const CellGraph& g, const AugmentationSpec& spec,
                                              std::span<const std::string> ops, Rng& rng);

// CSV with header "step,epoch,loss".
std::string loss_trace_csv(std::span<const StepRecord> steps);

struct ContrastiveProbe {
  double positive_similarity = 0.0;
  double negative_similarity = 0.0;
};

// Mean RBF similarity between each probe graph and one augmentation of it,
// versus between distinct probe graphs.
ContrastiveProbe probe_similarity(const nn::EncoderParams& params,
                                  std::span<const CellGraph> probe,
                                  const AugmentationSpec& augmentation,
                                  std::span<const std::string> ops,
                                  std::span<const std::string> vocabulary, double sigma,
                                  Rng& rng, bool normalize = true);

}  // namespace dclp
