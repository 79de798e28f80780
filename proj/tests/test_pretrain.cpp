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

#include "dclp/difficulty.hpp"
#include "dclp/pretrain.hpp"
#include "dclp/spaces.hpp"

using namespace dclp;

namespace {

const auto kSpace = SearchSpaceSpec::nb101();
const auto kVocab = kSpace.encoding_vocabulary();
const int kWidth = static_cast<int>(kVocab.size());

std::vector<CellGraph> unlabeled(int count, std::uint64_t seed) {
  Rng rng(seed);
  BenchmarkTable t = synthetic_table(kSpace, SyntheticOracle::for_space(kSpace, 0), count, rng);
  std::vector<CellGraph> out;
  for (const auto& r : t.records()) out.push_back(r.graph);
  return out;
}

ContrastiveConfig small_config() {
  ContrastiveConfig c;
  c.batch_size = 8;
  c.bank_capacity = 32;
  c.epochs = 1;
  c.hidden = 8;
  c.layers = 2;
  return c;
}

// Independent InfoNCE: -log(e^{p/t} / (e^{p/t} + sum e^{n/t})), no stabilisation.
double info_nce_oracle(double pos, const std::vector<double>& negs, double tau) {
  double denom = std::exp(pos / tau);
  for (double n : negs) denom += std::exp(n / tau);
  return -std::log(std::exp(pos / tau) / denom);
}

}  // namespace

TEST_CASE("RBF similarity") {
  nn::RowVector a(3), b(3);
  a << 0.1, -0.4, 2.0;
  CHECK(rbf_similarity(a, a, 0.7) == 1.0);
  // d = 2 sigma^2 -> e^-1.
  const double sigma = 0.8;
  b = a;
  b[0] += std::sqrt(2.0) * sigma;
  CHECK(std::abs(rbf_similarity(a, b, sigma) - std::exp(-1.0)) < 1e-12);

  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    nn::RowVector x(5), y(5);
    for (int k = 0; k < 5; ++k) {
      x[k] = uniform_real(rng, -1, 1);
      y[k] = uniform_real(rng, -1, 1);
    }
    double d = 0.0;
    for (int k = 0; k < 5; ++k) d += (x[k] - y[k]) * (x[k] - y[k]);
    CHECK(std::abs(rbf_similarity(x, y, 1.3) - std::exp(-d / (2 * 1.3 * 1.3))) < 1e-12);
  }
  CHECK_THROWS(rbf_similarity(a, nn::RowVector::Zero(2), 1.0));
}

TEST_CASE("InfoNCE values") {
  for (int n : {1, 3, 10, 100}) {
    const std::vector<double> negs(n, 0.42);
    CHECK(std::abs(info_nce_from_similarities(0.42, negs, 0.2) - std::log(n + 1.0)) < 1e-9);
  }
  const std::vector<double> negs{0.2, 0.3, 0.1};
  const double v = info_nce_from_similarities(0.9, negs, 0.2);
  CHECK(std::abs(v - info_nce_oracle(0.9, negs, 0.2)) < 1e-12);
  CHECK(v == doctest::Approx(0.0938).epsilon(1e-3));
  // Positive far above negatives with small tau -> loss near zero.
  CHECK(info_nce_from_similarities(1.0, std::vector<double>{0.0, 0.0}, 0.01) < 1e-40);
  CHECK_THROWS(info_nce_from_similarities(0.5, std::vector<double>{}, 0.2));

  nn::RowVector q(2), k(2);
  q << 0.0, 1.0;
  k << 0.5, 1.0;
  nn::Matrix neg(2, 2);
  neg << 2.0, 0.0, -1.0, -1.0;
  const std::vector<double> sims{rbf_similarity(q, neg.row(0), 1.0), rbf_similarity(q, neg.row(1), 1.0)};
  CHECK(info_nce(q, k, neg, 0.2, 1.0) ==
        doctest::Approx(info_nce_oracle(rbf_similarity(q, k, 1.0), sims, 0.2)).epsilon(1e-12));
}

TEST_CASE("memory bank is a FIFO ring") {
  MemoryBank bank(3, 2);
  for (int m = 1; m <= 7; ++m) {
    nn::RowVector row(2);
    row << m, -m;
    bank.push(row, Digest{static_cast<std::uint64_t>(m)});
    CHECK(bank.size() == std::min(m, 3));
    CHECK(bank.pushes() == static_cast<std::size_t>(m));
    // Oldest first.
    const int oldest = std::max(1, m - 2);
    for (int i = 0; i < bank.size(); ++i) {
      CHECK(bank.entry(i)[0] == oldest + i);
      CHECK(bank.origin(i).value == static_cast<std::uint64_t>(oldest + i));
    }
  }
  // Stored rows are copies.
  nn::RowVector row(2);
  row << 100, 100;
  bank.push(row, Digest{100});
  row[0] = -5;
  CHECK(bank.entry(2)[0] == 100);
  CHECK_THROWS(bank.push(nn::RowVector::Zero(3), Digest{}));
}

TEST_CASE("batch loss gradients match finite differences") {
  Rng rng(2);
  const int b = 4, w = 5;
  nn::Matrix q(b, w), p(b, w);
  for (int i = 0; i < b; ++i) {
    for (int k = 0; k < w; ++k) {
      q(i, k) = uniform_real(rng, -1, 1);
      p(i, k) = uniform_real(rng, -1, 1);
    }
  }
  std::vector<Digest> origins{Digest{1}, Digest{2}, Digest{3}, Digest{4}};
  MemoryBank bank(6, w);
  for (int m = 0; m < 6; ++m) {
    nn::RowVector r(w);
    for (int k = 0; k < w; ++k) r[k] = uniform_real(rng, -1, 1);
    bank.push(r, Digest{static_cast<std::uint64_t>(1 + m % 5)});  // some share origins
  }
  const auto analytic = contrastive_batch_loss(q, p, origins, bank, 0.2, 1.0);
  const double eps = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < b; ++i) {
    for (int k = 0; k < w; ++k) {
      for (nn::Matrix* m : {&q, &p}) {
        const double saved = (*m)(i, k);
        (*m)(i, k) = saved + eps;
        const double up = contrastive_batch_loss(q, p, origins, bank, 0.2, 1.0).loss;
        (*m)(i, k) = saved - eps;
        const double down = contrastive_batch_loss(q, p, origins, bank, 0.2, 1.0).loss;
        (*m)(i, k) = saved;
        const double numeric = (up - down) / (2 * eps);
        const double exact = m == &q ? analytic.d_queries(i, k) : analytic.d_positives(i, k);
        worst = std::max(worst, std::abs(numeric - exact) / std::max({std::abs(numeric), std::abs(exact), 1e-6}));
      }
    }
  }
  CHECK(worst < 1e-6);

  // Mean of per-query InfoNCE with in-batch + other-origin bank negatives.
  double expected = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> negs;
    for (int j = 0; j < b; ++j) {
      if (j != i) negs.push_back(rbf_similarity(q.row(i), p.row(j), 1.0));
    }
    for (int e = 0; e < bank.size(); ++e) {
      if (bank.origin(e) != origins[i]) negs.push_back(rbf_similarity(q.row(i), bank.entry(e), 1.0));
    }
    expected += info_nce_oracle(rbf_similarity(q.row(i), p.row(i), 1.0), negs, 0.2) / b;
  }
  CHECK(analytic.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("unit normalisation and its gradient") {
  Rng rng(20);
  nn::Matrix z(3, 4), g(3, 4);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z.data()[i] = uniform_real(rng, -3, 3);
    g.data()[i] = uniform_real(rng, -1, 1);
  }
  const auto u = l2_normalize_rows(z);
  for (int i = 0; i < 3; ++i) CHECK(u.row(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
  // Directional derivative of <g, normalize(z)> against central differences.
  const auto d = l2_normalize_backward(z, g);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    nn::Matrix zp = z, zm = z;
    zp.data()[i] += eps;
    zm.data()[i] -= eps;
    const double numeric =
        ((g.array() * l2_normalize_rows(zp).array()).sum() -
         (g.array() * l2_normalize_rows(zm).array()).sum()) / (2 * eps);
    CHECK(d.data()[i] == doctest::Approx(numeric).epsilon(1e-7));
  }
}

TEST_CASE("pre-training bookkeeping") {
  const auto graphs = unlabeled(32, 3);
  Rng rng(4);
  auto params = nn::init_encoder(kWidth, 8, 2, rng);
  CurriculumConfig cur;
  const auto r = pretrain(graphs, params, cur, small_config(), AugmentationSpec{},
                          kSpace.vocabulary, kVocab, rng);
  CHECK(r.optimizer_steps == static_cast<int>(r.steps.size()));
  CHECK(r.steps.size() == 4);
  CHECK(r.skipped_origins < 8);
  CHECK(r.epoch_losses.size() == 1);
}

TEST_CASE("pre-training is deterministic") {
  const auto graphs = unlabeled(40, 5);
  auto run = [&] {
    Rng rng(6);
    auto params = nn::init_encoder(kWidth, 8, 2, rng);
    auto cfg = small_config();
    cfg.epochs = 3;
    const auto r = pretrain(graphs, params, CurriculumConfig{}, cfg, AugmentationSpec{},
                            kSpace.vocabulary, kVocab, rng);
    return loss_trace_csv(r.steps);
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.rfind("step,epoch,loss\n", 0) == 0);
}

TEST_CASE("curriculum selections follow the sign of tau") {
  const auto graphs = unlabeled(48, 7);
  Rng rng(8);
  auto params = nn::init_encoder(kWidth, 8, 2, rng);
  auto cfg = small_config();
  cfg.epochs = 6;
  PretrainOptions opts;
  opts.log_selections = true;
  CurriculumConfig cur;
  cur.tau_start = -3.0;  // tau_m = -1: early steps negative
  cur.tau_end = 1.0;
  const auto r = pretrain(graphs, params, cur, cfg, AugmentationSpec{}, kSpace.vocabulary,
                          kVocab, rng, opts);
  int negative = 0, positive = 0;
  for (const auto& s : r.selections) {
    const double chosen = s.difficulties[s.chosen];
    const auto [lo, hi] = std::minmax_element(s.difficulties.begin(), s.difficulties.end());
    if (s.tau < 0) {
      CHECK(chosen == *lo);
      ++negative;
    } else if (s.tau > 0) {
      CHECK(chosen == *hi);
      ++positive;
    }
  }
  CHECK(negative > 0);
  CHECK(positive > 0);
}

TEST_CASE("encoder plus InfoNCE gradients match finite differences") {
  const auto graphs = unlabeled(6, 9);
  Rng rng(10);
  auto params = nn::init_encoder(kWidth, 10, 3, rng);
  AugmentationSpec aug;
  aug.candidates = 1;
  aug.ratio = 0.2;
  std::vector<CellGraph> anchors, positives;
  std::vector<Digest> origins;
  for (const auto& g : graphs) {
    auto c = robust_candidates(g, aug, kSpace.vocabulary, rng);
    if (c.empty()) continue;
    anchors.push_back(g);
    positives.push_back(c.front().graph);
    origins.push_back(canonical_hash(g));
  }
  REQUIRE(anchors.size() >= 3);
  const auto ab = nn::make_batch(anchors, kVocab);
  const auto pb = nn::make_batch(positives, kVocab);
  MemoryBank bank(4, params.embedding_width());
  for (int i = 0; i < 4; ++i) {
    nn::RowVector r(params.embedding_width());
    for (Eigen::Index k = 0; k < r.size(); ++k) r[k] = uniform_real(rng, -0.5, 0.5);
    r /= r.norm();
    bank.push(r, Digest{static_cast<std::uint64_t>(i)});
  }
  auto loss = [&] {
    return contrastive_batch_loss(l2_normalize_rows(nn::encode(params, ab)),
                                  l2_normalize_rows(nn::encode(params, pb)), origins, bank, 0.2,
                                  1.0).loss;
  };
  nn::EncoderTape ta, tp;
  const auto rq = nn::encode(params, ab, &ta);
  const auto rp = nn::encode(params, pb, &tp);
  const auto l = contrastive_batch_loss(l2_normalize_rows(rq), l2_normalize_rows(rp), origins,
                                        bank, 0.2, 1.0);
  auto grads = nn::zeros_like(params);
  nn::encoder_backward(params, ab, ta, l2_normalize_backward(rq, l.d_queries), grads);
  nn::encoder_backward(params, pb, tp, l2_normalize_backward(rp, l.d_positives), grads);
  const auto r = nn::finite_difference_check(loss, nn::blocks(params), nn::blocks(grads), 1e-4,
                                             300, rng);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("training separates positives from negatives on a held-out probe") {
  const auto graphs = unlabeled(400, 11);
  const std::vector<CellGraph> train(graphs.begin(), graphs.begin() + 200);
  const std::vector<CellGraph> probe(graphs.begin() + 200, graphs.end());
  Rng rng(12);
  auto params = nn::init_encoder(kWidth, 32, 3, rng);
  auto cfg = ContrastiveConfig::desk_scale();
  cfg.epochs = 20;
  cfg.hidden = 32;
  const auto r = pretrain(train, params, CurriculumConfig{}, cfg, AugmentationSpec{},
                          kSpace.vocabulary, kVocab, rng);
  Rng prng(13);
  const auto p = probe_similarity(r.params, probe, AugmentationSpec{}, kSpace.vocabulary, kVocab,
                                  cfg.rbf_sigma, prng);
  CHECK(p.positive_similarity > p.negative_similarity);
}
