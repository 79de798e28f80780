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

#include "dclp/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dclp {

namespace {

constexpr std::size_t kPredictChunk = 512;

double log_sum_exp(const std::vector<double>& xs, std::size_t from) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = from; i < xs.size(); ++i) top = std::max(top, xs[i]);
  double total = 0.0;
  for (std::size_t i = from; i < xs.size(); ++i) total += std::exp(xs[i] - top);
  return top + std::log(total);
}

struct Split {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> holdout;
};

Split split_labels(std::span<const LabeledSample> labeled, double fraction, Rng& rng) {
  Split s;
  std::vector<std::size_t> idx(labeled.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto held = static_cast<std::size_t>(std::floor(fraction * labeled.size()));
  if (held > 0) std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k < held ? s.holdout : s.train).push_back(labeled[idx[k]]);
  }
  return s;
}

// Everything needed to evaluate the loss on one fixed subset of samples.
struct Minibatch {
  nn::GraphBatch graphs;
  std::vector<double> targets;
  std::vector<int> order;  // listmle only
};

Minibatch make_minibatch(std::span<const MatrixEncoding> encodings,
                         std::span<const double> targets, std::span<const Digest> hashes,
                         std::span<const std::size_t> members) {
  std::vector<MatrixEncoding> enc;
  Minibatch mb;
  std::vector<Digest> hs;
  for (std::size_t m : members) {
    enc.push_back(encodings[m]);
    mb.targets.push_back(targets[m]);
    hs.push_back(hashes[m]);
  }
  mb.graphs = nn::make_batch(enc);
  mb.order = true_order(mb.targets, hs);
  return mb;
}

LossAndGrad batch_loss(LossKind kind, const nn::Vector& scores, const Minibatch& mb) {
  std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
  if (kind == LossKind::kListMle) return listmle_loss(s, mb.order);
  return mse_loss(s, mb.targets);
}

double evaluate(const Predictor& p, const std::vector<Minibatch>& batches) {
  double total = 0.0;
  for (const auto& mb : batches) {
    const nn::Vector scores = nn::head_forward(p.head, nn::encode(p.encoder, mb.graphs));
    total += batch_loss(p.loss, scores, mb).loss;
  }
  return total / static_cast<double>(batches.size());
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMse: return "mse";
    case LossKind::kMseNorm: return "mse_norm";
    case LossKind::kListMle: return "listmle";
  }
  return "listmle";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "mse_norm") return LossKind::kMseNorm;
  if (name == "listmle") return LossKind::kListMle;
  throw Error(ErrorKind::kConfig, "unknown loss '" + name + "'");
}

void FinetuneConfig::check() const {
  if (!(lr > 0.0) || max_epochs < 1 || patience < 1 || min_delta < 0.0 || head_hidden < 1 ||
      holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw invalid_argument("finetune config values out of range");
  }
}

int finetune_batch_size(std::size_t labeled) {
  return std::max(4, static_cast<int>((labeled + 4) / 5));
}

ZScore zscore_normalize(std::span<const double> labels) {
  if (labels.size() < 2) throw invalid_argument("zscore_normalize needs at least two labels");
  ZScore z;
  const double n = static_cast<double>(labels.size());
  z.mean = std::accumulate(labels.begin(), labels.end(), 0.0) / n;
  double var = 0.0;
  for (double x : labels) var += (x - z.mean) * (x - z.mean);
  z.stddev = std::sqrt(var / n);
  if (!(z.stddev > 0.0)) throw invalid_argument("zscore_normalize: zero-variance labels");
  for (double x : labels) z.values.push_back((x - z.mean) / z.stddev);
  return z;
}

LossAndGrad listmle_loss(std::span<const double> scores, std::span<const int> order) {
  const std::size_t n = scores.size();
  if (n == 0 || order.size() != n) throw invalid_argument("listmle_loss: length mismatch");
  std::vector<bool> seen(n, false);
  for (int o : order) {
    if (o < 0 || static_cast<std::size_t>(o) >= n || seen[o]) {
      throw invalid_argument("listmle_loss: order is not a permutation");
    }
    seen[o] = true;
  }
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = scores[order[i]];
  LossAndGrad out;
  out.grad = nn::Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double lse = log_sum_exp(s, i);
    out.loss += lse - s[i];
    out.grad[order[i]] -= 1.0;
    for (std::size_t j = i; j < n; ++j) out.grad[order[j]] += std::exp(s[j] - lse);
  }
  return out;
}

LossAndGrad mse_loss(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size() || scores.empty()) {
    throw invalid_argument("mse_loss: length mismatch");
  }
  const double n = static_cast<double>(scores.size());
  LossAndGrad out;
  out.grad.resize(static_cast<Eigen::Index>(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double r = scores[i] - targets[i];
    out.loss += r * r / n;
    out.grad[i] = 2.0 * r / n;
  }
  return out;
}

std::vector<int> true_order(std::span<const double> accuracies, std::span<const Digest> hashes) {
  std::vector<int> order(accuracies.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (accuracies[a] != accuracies[b]) return accuracies[a] > accuracies[b];
    return hashes[a] < hashes[b];
  });
  return order;
}

FinetuneResult finetune(const nn::EncoderParams& encoder, std::span<const LabeledSample> labeled,
                        const FinetuneConfig& cfg, std::span<const std::string> vocabulary,
                        Rng& rng) {
  cfg.check();
  if (labeled.size() < 2) throw invalid_argument("finetune needs at least two labels");
  Split split = split_labels(labeled, cfg.holdout_fraction, rng);
  const auto& train = split.train;
  const int batch_size = finetune_batch_size(train.size());
  if (cfg.loss == LossKind::kListMle && static_cast<int>(train.size()) < batch_size) {
    throw invalid_argument("finetune: listmle needs at least one full batch of labels");
  }

  FinetuneResult result;
  Predictor& p = result.predictor;
  p.encoder = encoder;
  p.loss = cfg.loss;
  p.vocabulary.assign(vocabulary.begin(), vocabulary.end());

  auto prepare = [&](const std::vector<LabeledSample>& samples, std::vector<MatrixEncoding>& enc,
                     std::vector<double>& targets, std::vector<Digest>& hashes) {
    for (const auto& s : samples) {
      enc.push_back(encode_matrices(as_oon(s.graph), vocabulary));
      targets.push_back(s.accuracy);
      hashes.push_back(canonical_hash(s.graph));
    }
  };
  std::vector<MatrixEncoding> enc;
  std::vector<double> targets;
  std::vector<Digest> hashes;
  prepare(train, enc, targets, hashes);
  std::vector<MatrixEncoding> hold_enc;
  std::vector<double> hold_targets;
  std::vector<Digest> hold_hashes;
  prepare(split.holdout, hold_enc, hold_targets, hold_hashes);

  if (cfg.loss == LossKind::kMseNorm) {
    const ZScore z = zscore_normalize(targets);
    p.normalized = true;
    p.label_mean = z.mean;
    p.label_std = z.stddev;
    targets = z.values;
    for (double& y : hold_targets) y = (y - z.mean) / z.stddev;
  }

  // Fixed partitions used to monitor the loss for early stopping.
  auto chunks = [&](const std::vector<MatrixEncoding>& e, const std::vector<double>& y,
                    const std::vector<Digest>& h) {
    std::vector<Minibatch> out;
    for (std::size_t start = 0; start < e.size(); start += batch_size) {
      std::vector<std::size_t> members;
      for (std::size_t k = start; k < std::min(e.size(), start + batch_size); ++k) {
        members.push_back(k);
      }
      out.push_back(make_minibatch(e, y, h, members));
    }
    return out;
  };
  const std::vector<Minibatch> monitor =
      split.holdout.empty() ? chunks(enc, targets, hashes)
                            : chunks(hold_enc, hold_targets, hold_hashes);

  p.head = nn::init_head(p.encoder.embedding_width(), cfg.head_hidden, rng);
  nn::Adam optimizer(cfg.lr);
  auto param_views = [&] {
    auto views = nn::blocks(p.head);
    if (!cfg.freeze_encoder) {
      auto enc_views = nn::blocks(p.encoder);
      views.insert(views.end(), enc_views.begin(), enc_views.end());
    }
    return views;
  };

  result.trace.batch_size = batch_size;
  result.trace.initial_loss = evaluate(p, monitor);
  result.trace.best_loss = result.trace.initial_loss;
  Predictor best = p;
  int wait = 0;
  double patience_anchor = result.trace.initial_loss;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      if (cfg.loss == LossKind::kListMle && end - start < 2) continue;
      std::span<const std::size_t> members(order.data() + start, end - start);
      const Minibatch mb = make_minibatch(enc, targets, hashes, members);
      nn::EncoderTape enc_tape;
      nn::HeadTape head_tape;
      const nn::Matrix z = nn::encode(p.encoder, mb.graphs, &enc_tape);
      const nn::Vector scores = nn::head_forward(p.head, z, &head_tape);
      const LossAndGrad lg = batch_loss(cfg.loss, scores, mb);
      if (!std::isfinite(lg.loss)) {
        throw runtime_error("finetune: non-finite loss in epoch " + std::to_string(epoch));
      }
      nn::MlpHead head_grad = nn::zeros_like(p.head);
      nn::EncoderParams enc_grad = nn::zeros_like(p.encoder);
      const nn::Matrix dz = nn::head_backward(p.head, head_tape, lg.grad, head_grad);
      auto grads = nn::blocks(head_grad);
      if (!cfg.freeze_encoder) {
        nn::encoder_backward(p.encoder, mb.graphs, enc_tape, dz, enc_grad);
        auto enc_views = nn::blocks(enc_grad);
        grads.insert(grads.end(), enc_views.begin(), enc_views.end());
      }
      optimizer.step(param_views(), grads);
      ++result.trace.optimizer_steps;
    }
    const double loss = evaluate(p, monitor);
    result.trace.epoch_losses.push_back(loss);
    if (loss < result.trace.best_loss) {
      result.trace.best_loss = loss;
      result.trace.best_epoch = epoch;
      best = p;
    }
    if (loss < patience_anchor - cfg.min_delta) {
      patience_anchor = loss;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  result.predictor = std::move(best);
  return result;
}

std::vector<double> predict(const Predictor& predictor, std::span<const CellGraph> graphs) {
  std::vector<double> out;
  out.reserve(graphs.size());
  for (std::size_t start = 0; start < graphs.size(); start += kPredictChunk) {
    const auto chunk = graphs.subspan(start, std::min(kPredictChunk, graphs.size() - start));
    const auto batch = nn::make_batch(chunk, predictor.vocabulary);
    const nn::Vector scores =
        nn::head_forward(predictor.head, nn::encode(predictor.encoder, batch));
    out.insert(out.end(), scores.data(), scores.data() + scores.size());
  }
  return out;
}

nlohmann::json to_json(const Predictor& p) {
  return {{"version", nn::kCheckpointVersion},
          {"kind", "predictor"},
          {"loss", to_string(p.loss)},
          {"vocabulary", p.vocabulary},
          {"normalized", p.normalized},
          {"label_mean", p.label_mean},
          {"label_std", p.label_std},
          {"encoder", nn::to_json(p.encoder)},
          {"head", nn::to_json(p.head)}};
}

Predictor predictor_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != nn::kCheckpointVersion || j.at("kind") != "predictor") {
    throw Error(ErrorKind::kArtifact, "not a version-1 predictor checkpoint");
  }
  Predictor p;
  p.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  p.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  p.normalized = j.at("normalized").get<bool>();
  p.label_mean = j.at("label_mean").get<double>();
  p.label_std = j.at("label_std").get<double>();
  p.encoder = nn::encoder_from_json(j.at("encoder"));
  p.head = nn::head_from_json(j.at("head"));
  if (p.head.l1.weight.rows() != p.encoder.embedding_width() ||
      static_cast<int>(p.vocabulary.size()) != p.encoder.input_width) {
    throw Error(ErrorKind::kArtifact, "predictor checkpoint shapes are inconsistent");
  }
  return p;
}

}  // namespace dclp
