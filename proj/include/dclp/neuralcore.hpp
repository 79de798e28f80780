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

// Minimal differentiable core for the cell encoder and prediction head.
//
// Graphs in a batch are stacked row-wise into one node-feature matrix. Each
// GIN layer computes
//
//   h^k_n = MLP^k(h^{k-1}_n + sum_{n' adjacent to n} h^{k-1}_{n'})
//
// with adjacency taken in both directions, and MLP^k = Dense -> ReLU ->
// Dense. The graph embedding concatenates the per-layer node means for
// layers 0..K. Gradients are propagated by hand, layer by layer, in reverse.
// All arithmetic is double precision.

#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dclp/cellgraph.hpp"
#include "dclp/common.hpp"

namespace dclp::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

struct Dense {
  Matrix weight;   // in x out
  RowVector bias;  // out

  Matrix forward(const Matrix& x) const {
    return (x * weight).rowwise() + bias;
  }
};

// Kaiming-uniform (fan-in, ReLU gain) weights, zero bias.
Dense make_dense(int in, int out, Rng& rng);

struct GinLayer {
  Dense inner;
  Dense outer;
};

struct EncoderParams {
  int input_width = 0;
  int hidden = 0;
  std::vector<GinLayer> layers;

  int embedding_width() const {
    return input_width + static_cast<int>(layers.size()) * hidden;
  }
};

EncoderParams init_encoder(int input_width, int hidden, int num_layers, Rng& rng);

struct MlpHead {
  Dense l1;
  Dense l2;
  Dense l3;
  double negative_slope = 0.02;
};

MlpHead init_head(int input_width, int hidden, Rng& rng);

// Same shapes, all zeros. Used as gradient accumulators.
EncoderParams zeros_like(const EncoderParams& p);
MlpHead zeros_like(const MlpHead& h);

// Flat view of one parameter block.
struct BlockView {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;

  Eigen::Map<Vector> map() const { return {data, size}; }
};

std::vector<BlockView> blocks(EncoderParams& p);
std::vector<BlockView> blocks(MlpHead& h);
std::size_t parameter_count(std::span<const BlockView> views);

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& block)
      : Error(ErrorKind::kRuntime, "non-finite gradient in parameter block '" + block + "'"),
        block_(block) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

// Throws NonFiniteGradient naming the first offending block.
void check_finite(std::span<const BlockView> grads);

// Accumulates the gradient of 0.5 * ||theta||^2, i.e. theta itself.
double add_l2(std::span<const BlockView> params, std::span<const BlockView> grads);

struct GraphBatch {
  Matrix features;               // total_nodes x input_width
  std::vector<int> offsets;      // graph g owns rows [offsets[g], offsets[g+1])
  std::vector<Edge> edges;       // global row indices

  int graph_count() const { return static_cast<int>(offsets.size()) - 1; }
};

GraphBatch make_batch(std::span<const MatrixEncoding> encodings);

// Encodes each cell (OOE cells via their OON view) against `vocabulary`,
// the full encoding vocabulary including markers.
GraphBatch make_batch(std::span<const CellGraph> graphs,
                      std::span<const std::string> vocabulary);

struct EncoderTape {
  std::vector<Matrix> h;          // K + 1 entries, h[0] = input features
  std::vector<Matrix> aggregated; // K entries
  std::vector<Matrix> inner_pre;  // K entries
};

// out = h + (A + A^T) h, applied per batch.
Matrix aggregate(const Matrix& h, const GraphBatch& batch);

EncoderTape gin_forward(const EncoderParams& params, const GraphBatch& batch);

// Per-layer mean pooling, concatenated for layers 0..K. One row per graph.
Matrix readout(std::span<const Matrix> layers, const GraphBatch& batch);

// Forward pass plus readout.
Matrix encode(const EncoderParams& params, const GraphBatch& batch,
              EncoderTape* tape = nullptr);

// Accumulates d(loss)/d(params) into `grads`, given d(loss)/d(embeddings).
void encoder_backward(const EncoderParams& params, const GraphBatch& batch,
                      const EncoderTape& tape, const Matrix& d_embeddings,
                      EncoderParams& grads);

struct HeadTape {
  Matrix x;
  Matrix pre1;
  Matrix pre2;
};

Vector head_forward(const MlpHead& head, const Matrix& x, HeadTape* tape = nullptr);

// Accumulates head gradients; returns d(loss)/d(x).
Matrix head_backward(const MlpHead& head, const HeadTape& tape, const Vector& d_scores,
                     MlpHead& grads);

// SGD with classical momentum: v <- m * v + g, theta <- theta - lr * v.
class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(std::span<const BlockView> params, std::span<const BlockView> grads);

 private:
  double lr_;
  double momentum_;
  std::vector<Vector> velocity_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<const BlockView> params, std::span<const BlockView> grads);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long step_count_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_block;
};

// Central differences on `coordinates` randomly chosen entries. Relative
// error is |a - n| / max(|a|, |n|, scale_floor).
GradientCheck finite_difference_check(const std::function<double()>& loss,
                                      std::span<const BlockView> params,
                                      std::span<const BlockView> analytic, double eps,
                                      std::size_t coordinates, Rng& rng,
                                      double scale_floor = 1e-6);

// Checkpoint blobs: {"version", "blocks": [{name, rows, cols, values}]}.
nlohmann::json to_json(const EncoderParams& p);
EncoderParams encoder_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpHead& h);
MlpHead head_from_json(const nlohmann::json& j);

inline constexpr int kCheckpointVersion = 1;

}  // namespace dclp::nn
