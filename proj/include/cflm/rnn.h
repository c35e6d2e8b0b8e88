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


// Recurrent building blocks shared by the predictor, generator and NNLM:
// an embedding followed by stacked tanh recurrent layers,
//   h_l[t] = tanh([h_{l-1}[t] | h_l[t-1]] W_l + b_l),  h_0[t] = E[token_t],
// and an affine output layer. Every model has a taped forward for training
// and a tape-free step function for inference; both use the same formula.

#ifndef CFLM_RNN_H_
#define CFLM_RNN_H_

#include <span>
#include <string>
#include <vector>

#include "cflm/common.h"
#include "cflm/numkit/tape.h"

namespace cflm {

struct RnnShape {
  int vocab_size = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int layers = 2;
};

class Linear {
 public:
  Linear() = default;
  // Uniform(+-1/sqrt(in)) weights; zero weights when rng is null. Biases
  // start at zero.
  Linear(const std::string& name, int in, int out, Rng* rng);

  nk::Var apply(nk::Tape& tape, nk::Var x);
  nk::RowVector apply(const nk::RowVector& x) const;
  // One output row per input row.
  nk::Matrix apply_rows(const nk::Matrix& x) const;

  nk::Parameter& weight() { return weight_; }
  nk::Parameter& bias() { return bias_; }
  void collect(nk::ParameterRefs& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  nk::Parameter weight_;
  nk::Parameter bias_;
};

class RnnTrunk {
 public:
  RnnTrunk() = default;
  RnnTrunk(const std::string& prefix, const RnnShape& shape, Rng& rng);

  const RnnShape& shape() const { return shape_; }
  void collect(nk::ParameterRefs& out);

  // Top-layer states for a batch of equal-length sequences. Entry t is a
  // B x hidden matrix: the state after consuming position t. With
  // `reverse` the sequences are read right to left, but entry t still
  // refers to position t.
  std::vector<nk::Var> forward(nk::Tape& tape,
                               const std::vector<std::vector<TokenId>>& batch,
                               bool reverse = false);

  struct State {
    std::vector<nk::RowVector> h;
  };
  State initial_state() const;
  // Consumes one token and returns the new top-layer state.
  const nk::RowVector& step(State& state, TokenId token) const;
  // Row-batched inference: one row per sequence.
  struct BatchState {
    std::vector<nk::Matrix> h;
  };
  BatchState initial_batch_state(std::size_t batch) const;
  const nk::Matrix& step_batch(BatchState& state,
                               std::span<const TokenId> tokens) const;
  // Top states of a whole sequence, one row per position.
  nk::Matrix run(std::span<const TokenId> tokens, bool reverse = false) const;

 private:
  RnnShape shape_;
  nk::Parameter embedding_;
  std::vector<nk::Parameter> weights_;
  std::vector<nk::Parameter> biases_;
};

}  // namespace cflm

#endif  // CFLM_RNN_H_
