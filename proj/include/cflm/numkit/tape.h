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

// Reverse-mode differentiation over a closed set of matrix primitives.
//
// A Tape records every primitive application in order. backward() walks the
// records in exact reverse order, accumulating gradients additively wherever
// a value feeds more than one consumer, and finally adds each parameter
// leaf's gradient into Parameter::grad.

#ifndef CFLM_NUMKIT_TAPE_H_
#define CFLM_NUMKIT_TAPE_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cflm/numkit/matrix.h"

namespace cflm::nk {

// A named trainable block. grad has the shape of value once touched.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParameterRefs = std::vector<Parameter*>;

class Tape;

// Handle to a recorded value.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  // Receives the node's own output and the gradient flowing into it.
  using Backward =
      std::function<void(Tape&, const Matrix& out, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& param);

  // Appends a node. `inputs` decides whether the node needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs,
             Backward backward);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() root w.r.t. v (zero-sized if untouched).
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Adds g into v's gradient slot. Called from backward rules.
  void accumulate(Var v, const Matrix& g);

  // Back-propagates from a 1x1 root.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
};

// Primitives. All throw cflm::Error on shape mismatch, naming both shapes.

// a (n x k) * b (k x m).
Var matmul(Var a, Var b);
// Elementwise sum; b may also be a 1 x cols row broadcast over a's rows.
Var add(Var a, Var b);
Var tanh(Var x);
Var sigmoid(Var x);
Var relu(Var x);
Var softmax_rows(Var x);
// Rows of table selected by ids; gradient scatters back into the table.
Var embedding(Var table, std::span<const TokenId> ids);
// [a | b].
Var concat(Var a, Var b);
// Sum over rows r of weights[r] * -log softmax(logits.row(r))[targets[r]].
// Returns a 1x1 value.
Var weighted_nll(Var logits, std::span<const TokenId> targets,
                 std::span<const double> weights);

}  // namespace cflm::nk

#endif  // CFLM_NUMKIT_TAPE_H_
