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

#include "dclp/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dclp/difficulty.hpp"

namespace dclp {

namespace {

double log_sum_exp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  double total = 0.0;
  for (double x : xs) total += std::exp(x - top);
  return top + std::log(total);
}

}  // namespace

std::string to_string(PositiveSelection s) {
  return s == PositiveSelection::kCurriculum ? "curriculum" : "uniform";
}

PositiveSelection positive_selection_from_string(const std::string& name) {
  if (name == "curriculum") return PositiveSelection::kCurriculum;
  if (name == "uniform") return PositiveSelection::kUniform;
  throw Error(ErrorKind::kConfig, "unknown positive selection '" + name + "'");
}

ContrastiveConfig ContrastiveConfig::desk_scale() {
  ContrastiveConfig cfg;
  cfg.batch_size = 256;
  cfg.bank_capacity = 1024;
  return cfg;
}

void ContrastiveConfig::check() const {
  if (!(temperature > 0.0) || !(rbf_sigma > 0.0) || bank_capacity < 1 || batch_size < 1 ||
      epochs < 1 || !(lr > 0.0) || momentum < 0.0 || candidates < 1 || hidden < 1 ||
      layers < 1) {
    throw invalid_argument("contrastive config values must be positive");
  }
}

MemoryBank::MemoryBank(int capacity, int width)
    : capacity_(capacity), storage_(capacity, width), origins_(capacity) {
  if (capacity < 1) throw invalid_argument("memory bank capacity must be positive");
}

void MemoryBank::push(const Eigen::Ref<const nn::RowVector>& embedding, Digest origin) {
  if (embedding.size() != storage_.cols()) {
    throw invalid_argument("memory bank width mismatch");
  }
  storage_.row(cursor_) = embedding;
  origins_[cursor_] = origin;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++pushes_;
}

int MemoryBank::slot(int i) const {
  // Oldest live entry sits at the cursor once the ring is full.
  const int start = size_ == capacity_ ? cursor_ : 0;
  return (start + i) % capacity_;
}

nn::RowVector MemoryBank::entry(int i) const { return storage_.row(slot(i)); }

Digest MemoryBank::origin(int i) const { return origins_[slot(i)]; }

double rbf_similarity(const Eigen::Ref<const nn::RowVector>& a,
                      const Eigen::Ref<const nn::RowVector>& b, double sigma) {
  if (a.size() != b.size()) throw invalid_argument("rbf_similarity: length mismatch");
  return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
}

double info_nce_from_similarities(double positive, std::span<const double> negatives,
                                  double tau) {
  if (negatives.empty()) throw invalid_argument("info_nce needs at least one negative");
  std::vector<double> logits{positive / tau};
  for (double s : negatives) logits.push_back(s / tau);
  return log_sum_exp(logits) - logits.front();
}

double info_nce(const nn::RowVector& query, const nn::RowVector& positive,
                const nn::Matrix& negatives, double tau, double sigma) {
  std::vector<double> sims;
  for (Eigen::Index i = 0; i < negatives.rows(); ++i) {
    sims.push_back(rbf_similarity(query, negatives.row(i), sigma));
  }
  return info_nce_from_similarities(rbf_similarity(query, positive, sigma), sims, tau);
}

nn::Matrix l2_normalize_rows(const nn::Matrix& z) {
  nn::Matrix out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

nn::Matrix l2_normalize_backward(const nn::Matrix& z, const nn::Matrix& d_unit) {
  nn::Matrix out = d_unit;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (norm == 0.0) continue;
    const nn::RowVector u = z.row(i) / norm;
    // (I - u u^T) g / |z|
    out.row(i) = (d_unit.row(i) - u.dot(d_unit.row(i)) * u) / norm;
  }
  return out;
}

ContrastiveBatchLoss contrastive_batch_loss(const nn::Matrix& queries,
                                            const nn::Matrix& positives,
                                            std::span<const Digest> origins,
                                            const MemoryBank& bank, double tau, double sigma) {
  const Eigen::Index batch = queries.rows();
  if (positives.rows() != batch || static_cast<Eigen::Index>(origins.size()) != batch) {
    throw invalid_argument("contrastive_batch_loss: batch size mismatch");
  }
  ContrastiveBatchLoss out;
  out.d_queries = nn::Matrix::Zero(batch, queries.cols());
  out.d_positives = nn::Matrix::Zero(batch, queries.cols());

  std::vector<nn::RowVector> bank_rows;
  std::vector<Digest> bank_origins;
  for (int b = 0; b < bank.size(); ++b) {
    bank_rows.push_back(bank.entry(b));
    bank_origins.push_back(bank.origin(b));
  }

  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const double scale = 1.0 / static_cast<double>(batch);
  // Keys for query i: index -1 - b for bank entry b, j >= 0 for positive j.
  std::vector<long> keys;
  std::vector<double> sims;
  std::vector<double> logits;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const nn::RowVector q = queries.row(i);
    keys.assign(1, static_cast<long>(i));
    for (Eigen::Index j = 0; j < batch; ++j) {
      if (j != i) keys.push_back(static_cast<long>(j));
    }
    for (std::size_t b = 0; b < bank_rows.size(); ++b) {
      if (bank_origins[b] != origins[i]) keys.push_back(-1 - static_cast<long>(b));
    }
    if (keys.size() < 2) {
      throw invalid_argument("contrastive_batch_loss: query has no negatives");
    }
    sims.resize(keys.size());
    logits.resize(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const nn::RowVector& key =
          keys[k] >= 0 ? nn::RowVector(positives.row(keys[k])) : bank_rows[-1 - keys[k]];
      sims[k] = std::exp(-(q - key).squaredNorm() * inv_two_sigma2);
      logits[k] = sims[k] / tau;
    }
    const double lse = log_sum_exp(logits);
    out.loss += scale * (lse - logits[0]);
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const double weight = std::exp(logits[k] - lse) - (k == 0 ? 1.0 : 0.0);
      // d sim / d q = -sim * (q - key) / sigma^2
      const double c = scale * weight / tau * sims[k] * 2.0 * inv_two_sigma2;
      if (keys[k] >= 0) {
        const nn::RowVector diff = q - positives.row(keys[k]);
        out.d_queries.row(i) -= c * diff;
        out.d_positives.row(keys[k]) += c * diff;
      } else {
        out.d_queries.row(i) -= c * (q - bank_rows[-1 - keys[k]]);
      }
    }
  }
  return out;
}

// Small cells can run out of legal edge flips for large ratios. Such a
// candidate is dropped; an origin with no surviving candidate is skipped.
std::vector<AugmentedGraph> robust_candidates(const CellGraph& g, const AugmentationSpec& spec,
                                              std::span<const std::string> ops, Rng& rng) {
  AugmentationSpec one = spec;
  one.candidates = 1;
  std::vector<AugmentedGraph> out;
  for (int i = 0; i < spec.candidates; ++i) {
    try {
      auto c = generate_candidates(g, one, ops, rng);
      out.push_back(std::move(c.front()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kRuntime) throw;
    }
  }
  return out;
}

PretrainResult pretrain(std::span<const CellGraph> unlabeled, nn::EncoderParams params,
                        CurriculumConfig curriculum, const ContrastiveConfig& cfg,
                        AugmentationSpec augmentation, std::span<const std::string> ops,
                        std::span<const std::string> vocabulary, Rng& rng,
                        const PretrainOptions& options) {
  cfg.check();
  if (unlabeled.empty()) throw invalid_argument("pretrain needs at least one unlabeled graph");
  augmentation.candidates = cfg.candidates;
  augmentation.check();

  const int n = static_cast<int>(unlabeled.size());
  const int batch_size = std::min(cfg.batch_size, n);
  const int steps_per_epoch = (n + batch_size - 1) / batch_size;
  curriculum.total_steps = cfg.epochs * steps_per_epoch;
  curriculum.check();

  std::vector<CellGraph> origins;
  std::vector<Digest> hashes;
  for (const auto& g : unlabeled) {
    origins.push_back(as_oon(g));
    hashes.push_back(canonical_hash(g));
  }

  PretrainResult result;
  MemoryBank bank(cfg.bank_capacity, params.embedding_width());
  nn::Sgd optimizer(cfg.lr, cfg.momentum);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int t = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    int epoch_steps = 0;
    for (int start = 0; start < n; start += batch_size) {
      ++t;
      const int end = std::min(start + batch_size, n);
      std::vector<CellGraph> anchors;
      std::vector<CellGraph> positives;
      std::vector<Digest> batch_hashes;
      const double tau_t = temperature(curriculum, t);
      for (int k = start; k < end; ++k) {
        const int idx = order[k];
        auto candidates = robust_candidates(origins[idx], augmentation, ops, rng);
        if (candidates.empty()) {
          ++result.skipped_origins;
          continue;
        }
        std::vector<double> difficulty;
        for (const auto& c : candidates) difficulty.push_back(edit_difficulty(c).value);
        std::size_t chosen = 0;
        if (cfg.selection == PositiveSelection::kCurriculum) {
          chosen = select(curriculum, t, difficulty, rng);
        } else {
          chosen = uniform_index(rng, candidates.size());
        }
        if (options.log_selections) {
          result.selections.push_back({t, tau_t, difficulty, chosen});
        }
        anchors.push_back(origins[idx]);
        positives.push_back(std::move(candidates[chosen].graph));
        batch_hashes.push_back(hashes[idx]);
      }

      if (anchors.empty()) continue;
      const auto anchor_batch = nn::make_batch(anchors, vocabulary);
      const auto positive_batch = nn::make_batch(positives, vocabulary);
      nn::EncoderTape anchor_tape;
      nn::EncoderTape positive_tape;
      const nn::Matrix rq = nn::encode(params, anchor_batch, &anchor_tape);
      const nn::Matrix rp = nn::encode(params, positive_batch, &positive_tape);
      const nn::Matrix zq = cfg.normalize_embeddings ? l2_normalize_rows(rq) : rq;
      const nn::Matrix zp = cfg.normalize_embeddings ? l2_normalize_rows(rp) : rp;
      auto loss = contrastive_batch_loss(zq, zp, batch_hashes, bank, cfg.temperature,
                                         cfg.rbf_sigma);
      if (cfg.normalize_embeddings) {
        loss.d_queries = l2_normalize_backward(rq, loss.d_queries);
        loss.d_positives = l2_normalize_backward(rp, loss.d_positives);
      }
      if (!std::isfinite(loss.loss)) {
        throw runtime_error("pretrain: non-finite loss at step " + std::to_string(t));
      }
      nn::EncoderParams grads = nn::zeros_like(params);
      nn::encoder_backward(params, anchor_batch, anchor_tape, loss.d_queries, grads);
      nn::encoder_backward(params, positive_batch, positive_tape, loss.d_positives, grads);
      optimizer.step(nn::blocks(params), nn::blocks(grads));
      ++result.optimizer_steps;

      for (Eigen::Index r = 0; r < zp.rows(); ++r) bank.push(zp.row(r), batch_hashes[r]);
      result.steps.push_back({t, epoch, loss.loss});
      epoch_total += loss.loss;
      ++epoch_steps;
    }
    if (epoch_steps == 0) throw runtime_error("pretrain: no unlabeled graph could be augmented");
    result.epoch_losses.push_back(epoch_total / epoch_steps);
    if (options.on_epoch_end) options.on_epoch_end(epoch, params);
  }
  result.params = std::move(params);
  return result;
}

std::string loss_trace_csv(std::span<const StepRecord> steps) {
  std::ostringstream out;
  out.precision(17);
  out << "step,epoch,loss\n";
  for (const auto& s : steps) out << s.step << ',' << s.epoch << ',' << s.loss << '\n';
  return out.str();
}

ContrastiveProbe probe_similarity(const nn::EncoderParams& params,
                                  std::span<const CellGraph> probe,
                                  const AugmentationSpec& augmentation,
                                  std::span<const std::string> ops,
                                  std::span<const std::string> vocabulary, double sigma,
                                  Rng& rng, bool normalize) {
  if (probe.size() < 2) throw invalid_argument("probe needs at least two graphs");
  AugmentationSpec single = augmentation;
  single.candidates = 1;
  std::vector<CellGraph> anchors;
  std::vector<CellGraph> augmented;
  for (const auto& g : probe) {
    auto c = robust_candidates(as_oon(g), single, ops, rng);
    if (c.empty()) continue;
    anchors.push_back(as_oon(g));
    augmented.push_back(std::move(c.front().graph));
  }
  if (anchors.size() < 2) throw invalid_argument("probe: fewer than two augmentable graphs");
  nn::Matrix za = nn::encode(params, nn::make_batch(anchors, vocabulary));
  nn::Matrix zb = nn::encode(params, nn::make_batch(augmented, vocabulary));
  if (normalize) {
    za = l2_normalize_rows(za);
    zb = l2_normalize_rows(zb);
  }
  ContrastiveProbe out;
  const auto m = za.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    out.positive_similarity += rbf_similarity(za.row(i), zb.row(i), sigma) / m;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i) {
        out.negative_similarity += rbf_similarity(za.row(i), za.row(j), sigma) / (m * (m - 1));
      }
    }
  }
  return out;
}

}  // namespace dclp
