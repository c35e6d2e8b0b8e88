// Copyright 2026 The cflm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cflm/rnn.h"

#include <cmath>

namespace cflm {
namespace {

nk::Matrix uniform_matrix(Rng& rng, int rows, int cols, double scale) {
  nk::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform(-scale, scale);
  }
  return m;
}

}  // namespace

Linear::Linear(const std::string& name, int in, int out, Rng* rng)
    : weight_(name + ".weight",
              rng ? uniform_matrix(*rng, in, out, 1.0 / std::sqrt(in))
                  : nk::Matrix::Zero(in, out)),
      bias_(name + ".bias", nk::Matrix::Zero(1, out)) {}

nk::Var Linear::apply(nk::Tape& tape, nk::Var x) {
  return nk::add(nk::matmul(x, tape.parameter(weight_)),
                 tape.parameter(bias_));
}

nk::RowVector Linear::apply(const nk::RowVector& x) const {
  return x * weight_.value + bias_.value;
}

nk::Matrix Linear::apply_rows(const nk::Matrix& x) const {
  nk::Matrix out = x * weight_.value;
  out.rowwise() += bias_.value.row(0);
  return out;
}

RnnTrunk::RnnTrunk(const std::string& prefix, const RnnShape& shape, Rng& rng)
    : shape_(shape),
      embedding_(prefix + ".embedding",
                 uniform_matrix(rng, shape.vocab_size, shape.embed_dim, 0.5)) {
  if (shape.vocab_size < 1 || shape.embed_dim < 1 || shape.hidden_dim < 1 ||
      shape.layers < 1) {
    throw Error("recurrent trunk: all dimensions must be positive");
  }
  for (int l = 0; l < shape.layers; ++l) {
    const int in = (l == 0 ? shape.embed_dim : shape.hidden_dim) +
                   shape.hidden_dim;
    const std::string name = prefix + ".layer" + std::to_string(l);
    weights_.emplace_back(name + ".weight",
                          uniform_matrix(rng, in, shape.hidden_dim,
                                         1.0 / std::sqrt(in)));
    biases_.emplace_back(name + ".bias", nk::Matrix::Zero(1, shape.hidden_dim));
  }
}

void RnnTrunk::collect(nk::ParameterRefs& out) {
  out.push_back(&embedding_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
}

std::vector<nk::Var> RnnTrunk::forward(
    nk::Tape& tape, const std::vector<std::vector<TokenId>>& batch,
    bool reverse) {
  if (batch.empty()) throw Error("recurrent trunk: empty batch");
  const std::size_t length = batch.front().size();
  for (const auto& seq : batch) {
    if (seq.size() != length) {
      throw Error("recurrent trunk: batch sequences differ in length");
    }
  }
  const auto rows = static_cast<Eigen::Index>(batch.size());
  nk::Var table = tape.parameter(embedding_);
  std::vector<nk::Var> w;
  std::vector<nk::Var> b;
  std::vector<nk::Var> h;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    w.push_back(tape.parameter(weights_[l]));
    b.push_back(tape.parameter(biases_[l]));
    h.push_back(tape.constant(nk::Matrix::Zero(rows, shape_.hidden_dim)));
  }
  std::vector<nk::Var> top(length);
  std::vector<TokenId> ids(batch.size());
  for (std::size_t k = 0; k < length; ++k) {
    const std::size_t t = reverse ? length - 1 - k : k;
    for (std::size_t r = 0; r < batch.size(); ++r) ids[r] = batch[r][t];
    nk::Var x = nk::embedding(table, ids);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h[l] = nk::tanh(nk::add(nk::matmul(nk::concat(x, h[l]), w[l]), b[l]));
      x = h[l];
    }
    top[t] = x;
  }
  return top;
}

RnnTrunk::State RnnTrunk::initial_state() const {
  State s;
  s.h.assign(weights_.size(), nk::RowVector::Zero(shape_.hidden_dim));
  return s;
}

const nk::RowVector& RnnTrunk::step(State& state, TokenId token) const {
  if (token < 0 || token >= shape_.vocab_size) {
    throw Error("recurrent trunk: token id " + std::to_string(token) +
                " out of range");
  }
  nk::RowVector x = embedding_.value.row(token);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    nk::RowVector in(x.size() + state.h[l].size());
    in << x, state.h[l];
    state.h[l] = (in * weights_[l].value + biases_[l].value).array().tanh();
    x = state.h[l];
  }
  return state.h.back();
}

RnnTrunk::BatchState RnnTrunk::initial_batch_state(std::size_t batch) const {
  BatchState s;
  s.h.assign(weights_.size(),
             nk::Matrix::Zero(static_cast<Eigen::Index>(batch), shape_.hidden_dim));
  return s;
}

const nk::Matrix& RnnTrunk::step_batch(BatchState& state,
                                       std::span<const TokenId> tokens) const {
  const auto rows = static_cast<Eigen::Index>(tokens.size());
  nk::Matrix x(rows, shape_.embed_dim);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const TokenId token = tokens[static_cast<std::size_t>(b)];
    if (token < 0 || token >= shape_.vocab_size) {
      throw Error("recurrent trunk: token id " + std::to_string(token) +
                  " out of range");
    }
    x.row(b) = embedding_.value.row(token);
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    nk::Matrix in(rows, x.cols() + state.h[l].cols());
    in << x, state.h[l];
    nk::Matrix pre = in * weights_[l].value;
    pre.rowwise() += biases_[l].value.row(0);
    state.h[l] = pre.array().tanh();
    x = state.h[l];
  }
  return state.h.back();
}

nk::Matrix RnnTrunk::run(std::span<const TokenId> tokens, bool reverse) const {
  nk::Matrix out(static_cast<Eigen::Index>(tokens.size()), shape_.hidden_dim);
  State s = initial_state();
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const std::size_t t = reverse ? tokens.size() - 1 - k : k;
    out.row(static_cast<Eigen::Index>(t)) = step(s, tokens[t]);
  }
  return out;
}

}  // namespace cflm
