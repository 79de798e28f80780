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

#include <cmath>
#include <limits>

#include "dclp/neuralcore.hpp"
#include "dclp/spaces.hpp"
#include "oracles.hpp"

using namespace dclp;
using namespace dclp::nn;

namespace {

const auto kSpace = SearchSpaceSpec::nb101();
const auto kVocab = kSpace.encoding_vocabulary();
const int kWidth = static_cast<int>(kVocab.size());

// Dense-matrix recomputation: H_k = relu((I + A + A^T) H_{k-1} W1 + b1) W2 + b2,
// embedding = concat of column means.
RowVector dense_embedding(const EncoderParams& p, const CellGraph& g) {
  const auto enc = encode_matrices(as_oon(g), kVocab);
  const int n = g.node_count;
  Matrix a = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) += enc.adjacency(i, j) + enc.adjacency(j, i);
  }
  Matrix h = enc.attributes;
  std::vector<RowVector> parts{h.colwise().mean()};
  for (const auto& layer : p.layers) {
    Matrix pre = a * h * layer.inner.weight;
    pre.rowwise() += layer.inner.bias;
    h = pre.cwiseMax(0.0) * layer.outer.weight;
    h.rowwise() += layer.outer.bias;
    parts.push_back(h.colwise().mean());
  }
  RowVector z(p.embedding_width());
  Eigen::Index col = 0;
  for (const auto& part : parts) {
    z.segment(col, part.size()) = part;
    col += part.size();
  }
  return z;
}

void randomize_biases(EncoderParams& p, Rng& rng) {
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.inner.bias.size(); ++i) l.inner.bias[i] = uniform_real(rng, -0.1, 0.1);
    for (Eigen::Index i = 0; i < l.outer.bias.size(); ++i) l.outer.bias[i] = uniform_real(rng, -0.1, 0.1);
  }
}

std::vector<CellGraph> sample_graphs(int count, Rng& rng) {
  std::vector<CellGraph> out;
  for (int i = 0; i < count; ++i) out.push_back(sample_uniform(kSpace, rng));
  return out;
}

}  // namespace

TEST_CASE("GIN forward equals a dense-matrix recomputation") {
  Rng rng(1);
  auto p = init_encoder(kWidth, 16, 3, rng);
  randomize_biases(p, rng);
  const auto graphs = sample_graphs(12, rng);
  const Matrix z = encode(p, make_batch(graphs, kVocab));
  REQUIRE(z.cols() == p.embedding_width());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const RowVector expected = dense_embedding(p, graphs[g]);
    CHECK((z.row(g) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero weights give zero features on an isolated node") {
  Rng rng(2);
  auto p = init_encoder(kWidth, 8, 3, rng);
  for (auto& v : blocks(p)) v.map().setZero();
  MatrixEncoding single{Eigen::MatrixXi::Zero(1, 1), Eigen::MatrixXd::Zero(1, kWidth)};
  single.attributes(0, 1) = 1.0;
  const auto tape = gin_forward(p, make_batch(std::vector<MatrixEncoding>{single}));
  for (std::size_t k = 1; k < tape.h.size(); ++k) CHECK(tape.h[k].cwiseAbs().maxCoeff() == 0.0);
  // Mean over one node is the node itself.
  const Matrix z = readout(tape.h, make_batch(std::vector<MatrixEncoding>{single}));
  CHECK(z(0, 1) == 1.0);
}

TEST_CASE("aggregation sums own and neighbour features") {
  Rng rng(3);
  const auto p = init_encoder(kWidth, 8, 1, rng);
  const CellGraph chain = make_oon({"input", "output"}, {{0, 1}});
  const auto batch = make_batch(std::vector<CellGraph>{chain}, kVocab);
  const auto tape = gin_forward(p, batch);
  CHECK(tape.aggregated[0].row(1) == batch.features.row(1) + batch.features.row(0));
  CHECK(tape.aggregated[0].row(0) == batch.features.row(0) + batch.features.row(1));
}

TEST_CASE("embeddings are invariant under node relabeling") {
  Rng rng(4);
  auto p = init_encoder(kWidth, 16, 3, rng);
  randomize_biases(p, rng);
  for (int i = 0; i < 50; ++i) {
    const CellGraph g = sample_uniform(kSpace, rng);
    const auto perm = testing::random_interior_permutation(g.node_count, rng);
    const CellGraph q = relabel_topological(permute_nodes(g, perm));
    const Matrix a = encode(p, make_batch(std::vector<CellGraph>{g}, kVocab));
    const Matrix b = encode(p, make_batch(std::vector<CellGraph>{q}, kVocab));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("shape mismatch is rejected") {
  Rng rng(5);
  const auto p = init_encoder(kWidth + 1, 8, 2, rng);
  const CellGraph g = make_oon({"input", "output"}, {{0, 1}});
  CHECK_THROWS(encode(p, make_batch(std::vector<CellGraph>{g}, kVocab)));
}

TEST_CASE("initialisation is Kaiming-uniform with zero biases") {
  Rng rng(6);
  const auto p = init_encoder(kWidth, 64, 3, rng);
  for (const auto& l : p.layers) {
    const double bound_inner = std::sqrt(6.0 / l.inner.weight.rows());
    CHECK(l.inner.weight.cwiseAbs().maxCoeff() <= bound_inner);
    CHECK(l.inner.bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.outer.bias.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(p.layers[0].inner.weight.rows() == kWidth);
  CHECK(p.embedding_width() == kWidth + 3 * 64);
}

TEST_CASE("finite-difference checker on closed forms") {
  Rng rng(7);
  double x = 3.0;
  std::vector<BlockView> params{{"x", &x, 1}};
  double gx = 6.0;
  std::vector<BlockView> grad{{"x", &gx, 1}};
  const auto r = finite_difference_check([&] { return x * x; }, params, grad, 1e-4, 10, rng);
  CHECK(r.max_relative_error < 1e-8);

  // Sum of all parameters -> gradient of ones; ||theta||^2 / 2 -> theta.
  auto p = init_encoder(kWidth, 4, 2, rng);
  auto views = blocks(p);
  auto ones = zeros_like(p);
  for (auto& v : blocks(ones)) v.map().setOnes();
  const auto sum_check = finite_difference_check(
      [&] {
        double s = 0.0;
        for (const auto& v : views) s += v.map().sum();
        return s;
      },
      views, blocks(ones), 1e-4, 200, rng);
  CHECK(sum_check.max_relative_error < 1e-8);

  auto l2 = zeros_like(p);
  add_l2(views, blocks(l2));
  auto l2_views = blocks(l2);
  for (std::size_t b = 0; b < views.size(); ++b) CHECK(l2_views[b].map() == views[b].map());
}

TEST_CASE("encoder and head gradients match central differences") {
  Rng rng(8);
  auto p = init_encoder(kWidth, 12, 3, rng);
  randomize_biases(p, rng);
  auto head = init_head(p.embedding_width(), 10, rng);
  const auto graphs = sample_graphs(5, rng);
  const auto batch = make_batch(graphs, kVocab);
  const Vector target = Vector::LinSpaced(5, -1.0, 1.0);

  auto loss = [&] {
    const Vector s = head_forward(head, encode(p, batch));
    return 0.5 * (s - target).squaredNorm();
  };
  EncoderTape et;
  HeadTape ht;
  const Vector s = head_forward(head, encode(p, batch, &et), &ht);
  auto gp = zeros_like(p);
  auto gh = zeros_like(head);
  const Matrix dz = head_backward(head, ht, s - target, gh);
  encoder_backward(p, batch, et, dz, gp);

  auto pv = blocks(p);
  auto hv = blocks(head);
  pv.insert(pv.end(), hv.begin(), hv.end());
  auto gv = blocks(gp);
  auto ghv = blocks(gh);
  gv.insert(gv.end(), ghv.begin(), ghv.end());
  const auto r = finite_difference_check(loss, pv, gv, 1e-4, 400, rng);
  CHECK(r.coordinates == 400);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("SGD with momentum follows the classical rule") {
  double theta = 1.0;
  double g = 0.5;
  std::vector<BlockView> pv{{"t", &theta, 1}};
  std::vector<BlockView> gv{{"t", &g, 1}};
  Sgd sgd(0.1, 0.9);
  sgd.step(pv, gv);
  CHECK(theta == doctest::Approx(0.95).epsilon(1e-15));
  sgd.step(pv, gv);
  CHECK(theta == doctest::Approx(0.95 - 0.1 * 0.95).epsilon(1e-15));
}

TEST_CASE("Adam follows the bias-corrected rule") {
  double theta = 1.0;
  double g = 0.5;
  std::vector<BlockView> pv{{"t", &theta, 1}};
  std::vector<BlockView> gv{{"t", &g, 1}};
  Adam adam(0.01);
  adam.step(pv, gv);
  CHECK(theta == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  // Second step with a different gradient, by hand.
  const double m1 = 0.1 * 0.5, v1 = 0.001 * 0.25;
  g = -1.0;
  const double m2 = 0.9 * m1 + 0.1 * g, v2 = 0.999 * v1 + 0.001 * g * g;
  const double mh = m2 / (1 - 0.81), vh = v2 / (1 - 0.999 * 0.999);
  const double expected = theta - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  adam.step(pv, gv);
  CHECK(theta == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("non-finite gradients name their block") {
  Rng rng(9);
  auto p = init_encoder(kWidth, 4, 2, rng);
  auto g = zeros_like(p);
  g.layers[1].outer.bias[0] = std::numeric_limits<double>::quiet_NaN();
  Sgd sgd(0.1, 0.9);
  try {
    sgd.step(blocks(p), blocks(g));
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.block() == "gin1.outer.bias");
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(10);
  auto p = init_encoder(kWidth, 8, 3, rng);
  randomize_biases(p, rng);
  const auto j = to_json(p);
  auto q = encoder_from_json(nlohmann::json::parse(j.dump()));
  auto pv = blocks(p);
  auto qv = blocks(q);
  for (std::size_t b = 0; b < pv.size(); ++b) CHECK(pv[b].map() == qv[b].map());

  const auto head = init_head(p.embedding_width(), 6, rng);
  const auto h2 = head_from_json(nlohmann::json::parse(to_json(head).dump()));
  CHECK(h2.l3.weight == head.l3.weight);

  auto bad = j;
  bad["version"] = 99;
  try {
    encoder_from_json(bad);
    FAIL("expected artifact error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kArtifact);
  }
  bad = j;
  bad["blocks"][0]["rows"] = 3;
  CHECK_THROWS_AS(encoder_from_json(bad), Error);
  CHECK_THROWS_AS(head_from_json(j), Error);
}

TEST_CASE("SGD reduces a tiny regression loss") {
  Rng rng(11);
  auto p = init_encoder(kWidth, 16, 2, rng);
  auto head = init_head(p.embedding_width(), 16, rng);
  const auto graphs = sample_graphs(16, rng);
  const auto batch = make_batch(graphs, kVocab);
  Vector target(16);
  for (int i = 0; i < 16; ++i) target[i] = graphs[i].edge_count() / 9.0;

  Sgd sgd(1e-4, 0.9);  // raw embeddings are large
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    EncoderTape et;
    HeadTape ht;
    const Vector s = head_forward(head, encode(p, batch, &et), &ht);
    losses.push_back((s - target).squaredNorm() / 16.0);
    auto gp = zeros_like(p);
    auto gh = zeros_like(head);
    const Matrix dz = head_backward(head, ht, 2.0 * (s - target) / 16.0, gh);
    encoder_backward(p, batch, et, dz, gp);
    auto pv = blocks(p);
    auto hv = blocks(head);
    pv.insert(pv.end(), hv.begin(), hv.end());
    auto gv = blocks(gp);
    auto ghv = blocks(gh);
    gv.insert(gv.end(), ghv.begin(), ghv.end());
    sgd.step(pv, gv);
  }
  CHECK(losses.back() < losses.front());
}
