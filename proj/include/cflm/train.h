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


// Mini-batch training loop shared by the trainable models.

#ifndef CFLM_TRAIN_H_
#define CFLM_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cflm/common.h"
#include "cflm/numkit/tape.h"
#include "json.hpp"

namespace cflm {

struct TrainConfig {
  int epochs = 8;
  int batch_size = 32;
  double learning_rate = 5e-3;
  // Joint gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double heldout_fraction = 0.1;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Held-out membership of item `index`, by hash. Deterministic in
// (index, seed) and independent of corpus order or size.
bool is_heldout(std::size_t index, std::uint64_t seed, double fraction);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

// Applies is_heldout to 0..n-1. With n >= 2 both sides are non-empty: if
// the hash leaves one side empty, the item with the smallest hash moves.
Split split_heldout(std::size_t n, std::uint64_t seed, double fraction);

// Shuffled batches of at most batch_size items of equal length.
std::vector<std::vector<std::size_t>> length_batches(
    std::span<const std::size_t> items, std::span<const int> length_of,
    int batch_size, Rng& rng);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean batch loss
  double heldout = 0.0;     // selection metric, lower is better
};

struct TrainHooks {
  // Plans the batches of one epoch (item indices).
  std::function<std::vector<std::vector<std::size_t>>(int epoch, Rng& rng)>
      plan_epoch;
  // Scalar loss of one batch.
  std::function<nk::Var(nk::Tape&, std::span<const std::size_t>)> batch_loss;
  // Selection metric on held-out data, evaluated after every epoch.
  std::function<double()> heldout_metric;
  // Optional; called after backward, before clipping and the update.
  std::function<void()> after_backward;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> batch_losses;
  int best_epoch = 0;
  double best_heldout = 0.0;
};

// Adam with gradient clipping. Parameters end at the best epoch's values.
TrainResult run_training(const nk::ParameterRefs& params,
                         const TrainConfig& config, const TrainHooks& hooks);

}  // namespace cflm

#endif  // CFLM_TRAIN_H_
