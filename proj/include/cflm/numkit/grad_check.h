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

#ifndef CFLM_NUMKIT_GRAD_CHECK_H_
#define CFLM_NUMKIT_GRAD_CHECK_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cflm/numkit/tape.h"

namespace cflm::nk {

// Builds a scalar loss on the given tape from the current parameter values.
// Must be deterministic.
using LossClosure = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct BlockReport {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockReport> blocks;
  double max_rel_error = 0.0;
  std::string worst_block;
  bool passed = true;
};

// Compares reverse-mode gradients against central differences for every
// entry of every parameter. Failures are reported, never thrown.
GradCheckReport grad_check(const LossClosure& loss,
                           std::span<Parameter* const> params,
                           double tolerance, GradCheckOptions options = {});

}  // namespace cflm::nk

#endif  // CFLM_NUMKIT_GRAD_CHECK_H_
