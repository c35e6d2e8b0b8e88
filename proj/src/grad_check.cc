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

#include "cflm/numkit/grad_check.h"

#include <algorithm>
#include <cmath>

namespace cflm::nk {
namespace {

double evaluate(const LossClosure& loss) {
  Tape tape;
  return tape.value(loss(tape))(0, 0);
}

}  // namespace

GradCheckReport grad_check(const LossClosure& loss,
                           std::span<Parameter* const> params,
                           double tolerance, GradCheckOptions options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradCheckReport report;
  for (Parameter* p : params) {
    BlockReport block;
    block.name = p->name;
    block.entries = static_cast<std::size_t>(p->value.size());
    double* data = p->value.data();
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + options.epsilon;
      const double up = evaluate(loss);
      data[i] = saved - options.epsilon;
      const double down = evaluate(loss);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = p->grad.data()[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), options.floor});
      double rel = std::abs(analytic - numeric) / denom;
      if (!std::isfinite(rel)) rel = INFINITY;
      block.max_rel_error = std::max(block.max_rel_error, rel);
    }
    block.passed = block.max_rel_error < tolerance;
    report.passed = report.passed && block.passed;
    if (block.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = block.max_rel_error;
      report.worst_block = block.name;
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace cflm::nk
