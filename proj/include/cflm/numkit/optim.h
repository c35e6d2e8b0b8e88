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

#ifndef CFLM_NUMKIT_OPTIM_H_
#define CFLM_NUMKIT_OPTIM_H_

#include <span>
#include <vector>

#include "cflm/numkit/tape.h"

namespace cflm::nk {

void zero_grad(std::span<Parameter* const> params);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

double grad_norm(std::span<Parameter* const> params);

// value -= lr * grad. Throws "gradient overflow" on a non-finite gradient.
void sgd_step(std::span<Parameter* const> params, double lr);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are bound to parameter order.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);
  int steps() const { return steps_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  int steps_ = 0;
};

}  // namespace cflm::nk

#endif  // CFLM_NUMKIT_OPTIM_H_
