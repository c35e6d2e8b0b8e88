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

#include "cflm/numkit/tape.h"

#include <vector>

namespace cflm::nk {
namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr || a.id < 0) throw Error("unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape != a.tape) throw Error("Vars recorded on different tapes");
  return t;
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw Error(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " +
                shape_of(b));
  }
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Parameter& param) {
  Node node;
  node.value = param.value;
  node.param = &param;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs,
                 Backward backward) {
  Node node;
  node.value = std::move(value);
  for (Var v : inputs) {
    if (v.tape != this) throw Error("Vars recorded on different tapes");
    node.requires_grad = node.requires_grad || nodes_.at(v.id).requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_.at(v.id);
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error("backward: root from another tape");
  const Matrix& root_value = nodes_.at(root.id).value;
  if (root_value.rows() != 1 || root_value.cols() != 1) {
    throw Error("backward: root must be 1x1, got " + shape_of(root_value));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (int id = root.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.grad.size() == 0) continue;
    if (node.backward) {
      // The rule may touch other nodes' grads but never its own.
      node.backward(*this, node.value, node.grad);
    }
    if (node.param != nullptr) {
      Parameter& p = *node.param;
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
        p.zero_grad();
      }
      p.grad += node.grad;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require_shape(av.cols() == bv.rows(), "matmul", av, bv);
  return t.record(av * bv, {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return t.record(av + bv, {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }
  require_shape(bv.rows() == 1 && bv.cols() == av.cols(), "add", av, bv);
  Matrix out = av.rowwise() + bv.row(0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  Matrix out = t.value(x).array().tanh().matrix();
  return t.record(std::move(out), {x},
                  [x](Tape& t, const Matrix& y, const Matrix& g) {
                    t.accumulate(x, (g.array() * (1.0 - y.array().square()))
                                        .matrix());
                  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  return t.record(nk::sigmoid(t.value(x)), {x},
                  [x](Tape& t, const Matrix& y, const Matrix& g) {
                    t.accumulate(
                        x, (g.array() * y.array() * (1.0 - y.array())).matrix());
                  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  Matrix out = t.value(x).cwiseMax(0.0);
  return t.record(std::move(out), {x}, [x](Tape& t, const Matrix&, const Matrix& g) {
    const Matrix& in = t.value(x);
    t.accumulate(x, (in.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  return t.record(nk::softmax_rows(t.value(x)), {x},
                  [x](Tape& t, const Matrix& p, const Matrix& g) {
                    // dx = p * (g - sum(g * p)) per row.
                    Eigen::VectorXd dots =
                        (g.array() * p.array()).rowwise().sum();
                    Matrix dx = p.array() * (g.colwise() - dots).array();
                    t.accumulate(x, dx);
                  });
}

Var embedding(Var table, std::span<const TokenId> ids) {
  Tape& t = tape_of(table);
  Matrix out = gather_rows(t.value(table), ids);
  std::vector<TokenId> rows(ids.begin(), ids.end());
  return t.record(std::move(out), {table},
                  [table, rows = std::move(rows)](Tape& t, const Matrix&, const Matrix& g) {
                    const Matrix& tv = t.value(table);
                    Matrix dt = Matrix::Zero(tv.rows(), tv.cols());
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      dt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
                    }
                    t.accumulate(table, dt);
                  });
}

Var concat(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require_shape(av.rows() == bv.rows(), "concat", av, bv);
  const Eigen::Index split = av.cols();
  return t.record(hconcat(av, bv), {a, b},
                  [a, b, split](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(split));
                    if (t.requires_grad(b)) {
                      t.accumulate(b, g.rightCols(g.cols() - split));
                    }
                  });
}

Var weighted_nll(Var logits, std::span<const TokenId> targets,
                 std::span<const double> weights) {
  Tape& t = tape_of(logits);
  const Matrix& lv = t.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows() ||
      weights.size() != targets.size()) {
    throw Error("weighted_nll: logits " + shape_of(lv) + " vs " +
                std::to_string(targets.size()) + " targets and " +
                std::to_string(weights.size()) + " weights");
  }
  Matrix logp = log_softmax_rows(lv);
  double loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || targets[r] >= lv.cols()) {
      throw Error("weighted_nll: target " + std::to_string(targets[r]) +
                  " out of range for logits " + shape_of(lv));
    }
    loss -= weights[r] * logp(static_cast<Eigen::Index>(r), targets[r]);
  }
  std::vector<TokenId> tgt(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(
      Matrix::Constant(1, 1, loss), {logits},
      [logits, logp = std::move(logp), tgt = std::move(tgt),
       w = std::move(w)](Tape& t, const Matrix&, const Matrix& g) {
        Matrix d = logp.array().exp();
        for (std::size_t r = 0; r < tgt.size(); ++r) {
          const auto row = static_cast<Eigen::Index>(r);
          d(row, tgt[r]) -= 1.0;
          d.row(row) *= w[r] * g(0, 0);
        }
        t.accumulate(logits, d);
      });
}

}  // namespace cflm::nk
