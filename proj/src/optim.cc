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

#include "cflm/numkit/optim.h"

#include <cmath>

namespace cflm::nk {
namespace {

// Parameters never touched by backward() get an explicit zero gradient.
void ensure_grad(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    p.zero_grad();
  }
}

void check_finite(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    ensure_grad(*p);
    if (!p->grad.allFinite()) throw Error("gradient overflow");
  }
}

}  // namespace

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

double grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (Parameter* p : params) {
    ensure_grad(*p);
    sq += p->grad.squaredNorm();
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) p->grad *= scale;
  }
  return norm;
}

void sgd_step(std::span<Parameter* const> params, double lr) {
  check_finite(params);
  for (Parameter* p : params) p->value -= lr * p->grad;
}

void Adam::step(std::span<Parameter* const> params) {
  check_finite(params);
  if (m_.empty()) {
    for (Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) {
    throw Error("Adam: parameter list changed between steps");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, steps_);
  const double c2 = 1.0 - std::pow(config_.beta2, steps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] +
            (1.0 - config_.beta2) * p.grad.array().square().matrix();
    const auto m_hat = m_[i].array() / c1;
    const auto v_hat = v_[i].array() / c2;
    p.value.array() -= config_.lr * m_hat / (v_hat.sqrt() + config_.eps);
  }
}

}  // namespace cflm::nk
