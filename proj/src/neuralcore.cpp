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

#include "dclp/neuralcore.hpp"

#include <algorithm>
#include <cmath>

namespace dclp::nn {

namespace {

Dense zeros_like(const Dense& d) {
  return {Matrix::Zero(d.weight.rows(), d.weight.cols()), RowVector::Zero(d.bias.size())};
}

void push(std::vector<BlockView>& out, const std::string& prefix, Dense& d) {
  out.push_back({prefix + ".weight", d.weight.data(), d.weight.size()});
  out.push_back({prefix + ".bias", d.bias.data(), d.bias.size()});
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix leaky(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix leaky_grad(const Matrix& pre, const Matrix& d, double slope) {
  return d.binaryExpr(pre, [slope](double g, double v) { return v > 0.0 ? g : slope * g; });
}

// Backprop through y = x W + b; returns dx.
Matrix dense_backward(const Dense& d, const Matrix& x, const Matrix& dy, Dense& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * d.weight.transpose();
}

nlohmann::json blocks_to_json(std::span<const BlockView> views,
                              const std::vector<std::pair<Eigen::Index, Eigen::Index>>& shapes) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < views.size(); ++i) {
    // Eigen storage is column-major; emit row-major values.
    const auto [rows, cols] = shapes[i];
    Eigen::Map<const Matrix> m(views[i].data, rows, cols);
    std::vector<double> values;
    values.reserve(views[i].size);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) values.push_back(m(r, c));
    }
    arr.push_back({{"name", views[i].name}, {"rows", rows}, {"cols", cols}, {"values", values}});
  }
  return arr;
}

void blocks_from_json(const nlohmann::json& arr, std::span<const BlockView> views,
                      const std::vector<std::pair<Eigen::Index, Eigen::Index>>& shapes) {
  if (!arr.is_array() || arr.size() != views.size()) {
    throw Error(ErrorKind::kArtifact, "checkpoint block count mismatch");
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& b = arr[i];
    const auto [rows, cols] = shapes[i];
    if (b.at("name").get<std::string>() != views[i].name ||
        b.at("rows").get<Eigen::Index>() != rows || b.at("cols").get<Eigen::Index>() != cols) {
      throw Error(ErrorKind::kArtifact, "checkpoint block '" + views[i].name +
                                            "' has an incompatible name or shape");
    }
    const auto& values = b.at("values");
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw Error(ErrorKind::kArtifact, "checkpoint block '" + views[i].name + "' is truncated");
    }
    Eigen::Map<Matrix> m(views[i].data, rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[k++].get<double>();
    }
  }
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_of(const EncoderParams& p) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> s;
  for (const auto& layer : p.layers) {
    for (const Dense* d : {&layer.inner, &layer.outer}) {
      s.emplace_back(d->weight.rows(), d->weight.cols());
      s.emplace_back(1, d->bias.size());
    }
  }
  return s;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_of(const MlpHead& h) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> s;
  for (const Dense* d : {&h.l1, &h.l2, &h.l3}) {
    s.emplace_back(d->weight.rows(), d->weight.cols());
    s.emplace_back(1, d->bias.size());
  }
  return s;
}

}  // namespace

Dense make_dense(int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / in);
  Dense d{Matrix(in, out), RowVector::Zero(out)};
  // Fill row-major so the draw order does not depend on Eigen's layout.
  for (int r = 0; r < in; ++r) {
    for (int c = 0; c < out; ++c) d.weight(r, c) = uniform_real(rng, -bound, bound);
  }
  return d;
}

EncoderParams init_encoder(int input_width, int hidden, int num_layers, Rng& rng) {
  if (input_width < 1 || hidden < 1 || num_layers < 1) {
    throw invalid_argument("encoder dimensions must be positive");
  }
  EncoderParams p{input_width, hidden, {}};
  int in = input_width;
  for (int k = 0; k < num_layers; ++k) {
    GinLayer layer;
    layer.inner = make_dense(in, hidden, rng);
    layer.outer = make_dense(hidden, hidden, rng);
    p.layers.push_back(std::move(layer));
    in = hidden;
  }
  return p;
}

MlpHead init_head(int input_width, int hidden, Rng& rng) {
  MlpHead h;
  h.l1 = make_dense(input_width, hidden, rng);
  h.l2 = make_dense(hidden, hidden, rng);
  h.l3 = make_dense(hidden, 1, rng);
  return h;
}

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z{p.input_width, p.hidden, {}};
  for (const auto& layer : p.layers) {
    z.layers.push_back({zeros_like(layer.inner), zeros_like(layer.outer)});
  }
  return z;
}

MlpHead zeros_like(const MlpHead& h) {
  return {zeros_like(h.l1), zeros_like(h.l2), zeros_like(h.l3), h.negative_slope};
}

std::vector<BlockView> blocks(EncoderParams& p) {
  std::vector<BlockView> out;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const std::string prefix = "gin" + std::to_string(k);
    push(out, prefix + ".inner", p.layers[k].inner);
    push(out, prefix + ".outer", p.layers[k].outer);
  }
  return out;
}

std::vector<BlockView> blocks(MlpHead& h) {
  std::vector<BlockView> out;
  push(out, "head.l1", h.l1);
  push(out, "head.l2", h.l2);
  push(out, "head.l3", h.l3);
  return out;
}

std::size_t parameter_count(std::span<const BlockView> views) {
  std::size_t n = 0;
  for (const auto& v : views) n += static_cast<std::size_t>(v.size);
  return n;
}

void check_finite(std::span<const BlockView> grads) {
  for (const auto& g : grads) {
    if (!g.map().allFinite()) throw NonFiniteGradient(g.name);
  }
}

double add_l2(std::span<const BlockView> params, std::span<const BlockView> grads) {
  double loss = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    loss += 0.5 * params[i].map().squaredNorm();
    grads[i].map() += params[i].map();
  }
  return loss;
}

GraphBatch make_batch(std::span<const MatrixEncoding> encodings) {
  GraphBatch batch;
  batch.offsets.push_back(0);
  Eigen::Index total = 0;
  Eigen::Index width = encodings.empty() ? 0 : encodings.front().attributes.cols();
  for (const auto& enc : encodings) {
    if (enc.attributes.cols() != width) {
      throw invalid_argument("shape mismatch: encodings disagree on vocabulary width");
    }
    total += enc.attributes.rows();
    batch.offsets.push_back(static_cast<int>(total));
  }
  batch.features.resize(total, width);
  for (std::size_t g = 0; g < encodings.size(); ++g) {
    const auto& enc = encodings[g];
    const int base = batch.offsets[g];
    batch.features.middleRows(base, enc.attributes.rows()) = enc.attributes;
    for (Eigen::Index i = 0; i < enc.adjacency.rows(); ++i) {
      for (Eigen::Index j = 0; j < enc.adjacency.cols(); ++j) {
        if (enc.adjacency(i, j) != 0) {
          batch.edges.push_back({base + static_cast<int>(i), base + static_cast<int>(j)});
        }
      }
    }
  }
  return batch;
}

GraphBatch make_batch(std::span<const CellGraph> graphs,
                      std::span<const std::string> vocabulary) {
  std::vector<MatrixEncoding> encodings;
  encodings.reserve(graphs.size());
  for (const auto& g : graphs) encodings.push_back(encode_matrices(as_oon(g), vocabulary));
  return make_batch(encodings);
}

Matrix aggregate(const Matrix& h, const GraphBatch& batch) {
  Matrix out = h;
  for (const Edge& e : batch.edges) {
    out.row(e.to) += h.row(e.from);
    out.row(e.from) += h.row(e.to);
  }
  return out;
}

EncoderTape gin_forward(const EncoderParams& params, const GraphBatch& batch) {
  if (batch.features.cols() != params.input_width) {
    throw invalid_argument("shape mismatch: features have " +
                           std::to_string(batch.features.cols()) + " columns, encoder expects " +
                           std::to_string(params.input_width));
  }
  EncoderTape tape;
  tape.h.push_back(batch.features);
  for (const auto& layer : params.layers) {
    tape.aggregated.push_back(aggregate(tape.h.back(), batch));
    tape.inner_pre.push_back(layer.inner.forward(tape.aggregated.back()));
    tape.h.push_back(layer.outer.forward(relu(tape.inner_pre.back())));
  }
  return tape;
}

Matrix readout(std::span<const Matrix> layers, const GraphBatch& batch) {
  Eigen::Index width = 0;
  for (const auto& h : layers) width += h.cols();
  Matrix z(batch.graph_count(), width);
  for (int g = 0; g < batch.graph_count(); ++g) {
    const int begin = batch.offsets[g];
    const int count = batch.offsets[g + 1] - begin;
    Eigen::Index col = 0;
    for (const auto& h : layers) {
      z.block(g, col, 1, h.cols()) = h.middleRows(begin, count).colwise().mean();
      col += h.cols();
    }
  }
  return z;
}

Matrix encode(const EncoderParams& params, const GraphBatch& batch, EncoderTape* tape) {
  EncoderTape local = gin_forward(params, batch);
  Matrix z = readout(local.h, batch);
  if (tape) *tape = std::move(local);
  return z;
}

void encoder_backward(const EncoderParams& params, const GraphBatch& batch,
                      const EncoderTape& tape, const Matrix& d_embeddings, EncoderParams& grads) {
  const std::size_t depth = params.layers.size();
  // Readout gradient for each layer's node features.
  std::vector<Matrix> dh(depth + 1);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k <= depth; ++k) {
    const Eigen::Index w = tape.h[k].cols();
    dh[k] = Matrix::Zero(tape.h[k].rows(), w);
    for (int g = 0; g < batch.graph_count(); ++g) {
      const int begin = batch.offsets[g];
      const int count = batch.offsets[g + 1] - begin;
      const RowVector share = d_embeddings.block(g, col, 1, w) / static_cast<double>(count);
      dh[k].middleRows(begin, count).rowwise() += share;
    }
    col += w;
  }
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = params.layers[k];
    auto& grad = grads.layers[k];
    const Matrix act = relu(tape.inner_pre[k]);
    Matrix d_act = dense_backward(layer.outer, act, dh[k + 1], grad.outer);
    Matrix d_pre = d_act.cwiseProduct(
        tape.inner_pre[k].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    Matrix d_agg = dense_backward(layer.inner, tape.aggregated[k], d_pre, grad.inner);
    // The aggregation operator (I + A + A^T) is symmetric.
    dh[k] += aggregate(d_agg, batch);
  }
}

Vector head_forward(const MlpHead& head, const Matrix& x, HeadTape* tape) {
  Matrix pre1 = head.l1.forward(x);
  Matrix pre2 = head.l2.forward(leaky(pre1, head.negative_slope));
  Vector out = head.l3.forward(leaky(pre2, head.negative_slope)).col(0);
  if (tape) *tape = {x, std::move(pre1), std::move(pre2)};
  return out;
}

Matrix head_backward(const MlpHead& head, const HeadTape& tape, const Vector& d_scores,
                     MlpHead& grads) {
  const double s = head.negative_slope;
  Matrix d_out = d_scores;
  Matrix d_a2 = dense_backward(head.l3, leaky(tape.pre2, s), d_out, grads.l3);
  Matrix d_a1 = dense_backward(head.l2, leaky(tape.pre1, s), leaky_grad(tape.pre2, d_a2, s),
                               grads.l2);
  return dense_backward(head.l1, tape.x, leaky_grad(tape.pre1, d_a1, s), grads.l1);
}

void Sgd::step(std::span<const BlockView> params, std::span<const BlockView> grads) {
  check_finite(grads);
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.push_back(Vector::Zero(p.size));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grads[i].map();
    params[i].map() -= lr_ * velocity_[i];
  }
}

void Adam::step(std::span<const BlockView> params, std::span<const BlockView> grads) {
  check_finite(grads);
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Vector::Zero(p.size));
      v_.push_back(Vector::Zero(p.size));
    }
  }
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = grads[i].map();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].map().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

GradientCheck finite_difference_check(const std::function<double()>& loss,
                                      std::span<const BlockView> params,
                                      std::span<const BlockView> analytic, double eps,
                                      std::size_t coordinates, Rng& rng, double scale_floor) {
  GradientCheck result;
  const std::size_t total = parameter_count(params);
  if (total == 0) return result;
  std::vector<std::size_t> cumulative;
  std::size_t acc = 0;
  for (const auto& p : params) {
    acc += static_cast<std::size_t>(p.size);
    cumulative.push_back(acc);
  }
  for (std::size_t c = 0; c < coordinates; ++c) {
    const std::size_t flat = uniform_index(rng, total);
    const std::size_t b = std::upper_bound(cumulative.begin(), cumulative.end(), flat) -
                          cumulative.begin();
    const std::size_t offset = flat - (b == 0 ? 0 : cumulative[b - 1]);
    double& theta = params[b].data[offset];
    const double saved = theta;
    theta = saved + eps;
    const double up = loss();
    theta = saved - eps;
    const double down = loss();
    theta = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double exact = analytic[b].data[offset];
    const double denom = std::max({std::abs(exact), std::abs(numeric), scale_floor});
    const double rel = std::abs(exact - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_block = params[b].name;
    }
    ++result.coordinates;
  }
  return result;
}

nlohmann::json to_json(const EncoderParams& p) {
  EncoderParams copy = p;
  auto views = blocks(copy);
  return {{"version", kCheckpointVersion},
          {"kind", "encoder"},
          {"input_width", p.input_width},
          {"hidden", p.hidden},
          {"layers", p.layers.size()},
          {"blocks", blocks_to_json(views, shapes_of(p))}};
}

EncoderParams encoder_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion || j.at("kind") != "encoder") {
    throw Error(ErrorKind::kArtifact, "not a version-1 encoder checkpoint");
  }
  EncoderParams p{j.at("input_width").get<int>(), j.at("hidden").get<int>(), {}};
  const int layers = j.at("layers").get<int>();
  int in = p.input_width;
  for (int k = 0; k < layers; ++k) {
    GinLayer layer{{Matrix::Zero(in, p.hidden), RowVector::Zero(p.hidden)},
                   {Matrix::Zero(p.hidden, p.hidden), RowVector::Zero(p.hidden)}};
    p.layers.push_back(std::move(layer));
    in = p.hidden;
  }
  auto views = blocks(p);
  blocks_from_json(j.at("blocks"), views, shapes_of(p));
  return p;
}

nlohmann::json to_json(const MlpHead& h) {
  MlpHead copy = h;
  auto views = blocks(copy);
  return {{"version", kCheckpointVersion},
          {"kind", "head"},
          {"input_width", h.l1.weight.rows()},
          {"hidden", h.l1.weight.cols()},
          {"negative_slope", h.negative_slope},
          {"blocks", blocks_to_json(views, shapes_of(h))}};
}

MlpHead head_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion || j.at("kind") != "head") {
    throw Error(ErrorKind::kArtifact, "not a version-1 head checkpoint");
  }
  const auto in = j.at("input_width").get<Eigen::Index>();
  const auto hidden = j.at("hidden").get<Eigen::Index>();
  MlpHead h{{Matrix::Zero(in, hidden), RowVector::Zero(hidden)},
            {Matrix::Zero(hidden, hidden), RowVector::Zero(hidden)},
            {Matrix::Zero(hidden, 1), RowVector::Zero(1)},
            j.at("negative_slope").get<double>()};
  auto views = blocks(h);
  blocks_from_json(j.at("blocks"), views, shapes_of(h));
  return h;
}

}  // namespace dclp::nn
