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


#include "cflm/train.h"

#include <algorithm>
#include <limits>
#include <map>

#include "cflm/numkit/optim.h"

namespace cflm {

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"clip_norm", clip_norm},
          {"seed", seed},
          {"heldout_fraction", heldout_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.heldout_fraction = j.value("heldout_fraction", c.heldout_fraction);
  if (c.epochs < 1 || c.batch_size < 1 || !(c.learning_rate > 0.0) ||
      c.heldout_fraction < 0.0 || c.heldout_fraction >= 1.0) {
    throw Error("invalid training config " + j.dump());
  }
  return c;
}

namespace {

double unit_hash(std::size_t index, std::uint64_t seed) {
  return static_cast<double>(mix64(derive_seed(seed, "heldout") ^
                                   mix64(index)) >> 11) *
         0x1.0p-53;
}

}  // namespace

bool is_heldout(std::size_t index, std::uint64_t seed, double fraction) {
  return unit_hash(index, seed) < fraction;
}

Split split_heldout(std::size_t n, std::uint64_t seed, double fraction) {
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    (is_heldout(i, seed, fraction) ? s.heldout : s.train).push_back(i);
  }
  if (n >= 2 && fraction > 0.0 && (s.train.empty() || s.heldout.empty())) {
    auto& from = s.train.empty() ? s.heldout : s.train;
    auto& to = s.train.empty() ? s.train : s.heldout;
    auto it = std::min_element(from.begin(), from.end(),
                               [&](std::size_t a, std::size_t b) {
                                 return unit_hash(a, seed) < unit_hash(b, seed);
                               });
    to.push_back(*it);
    from.erase(it);
  }
  return s;
}

std::vector<std::vector<std::size_t>> length_batches(
    std::span<const std::size_t> items, std::span<const int> length_of,
    int batch_size, Rng& rng) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i : items) buckets[length_of[i]].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [length, bucket] : buckets) {
    rng.shuffle(std::span<std::size_t>(bucket));
    for (std::size_t k = 0; k < bucket.size();
         k += static_cast<std::size_t>(batch_size)) {
      const std::size_t end =
          std::min(bucket.size(), k + static_cast<std::size_t>(batch_size));
      batches.emplace_back(bucket.begin() + static_cast<std::ptrdiff_t>(k),
                           bucket.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

TrainResult run_training(const nk::ParameterRefs& params,
                         const TrainConfig& config, const TrainHooks& hooks) {
  nk::Adam adam(nk::AdamConfig{config.learning_rate});
  Rng rng(derive_seed(config.seed, "batches"));
  TrainResult result;
  result.best_heldout = std::numeric_limits<double>::infinity();
  std::vector<nk::Matrix> best;
  for (const nk::Parameter* p : params) best.push_back(p->value);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = hooks.plan_epoch(epoch, rng);
    double total = 0.0;
    for (const auto& batch : batches) {
      nk::zero_grad(params);
      nk::Tape tape;
      nk::Var loss = hooks.batch_loss(tape, batch);
      const double value = tape.value(loss)(0, 0);
      tape.backward(loss);
      if (hooks.after_backward) hooks.after_backward();
      if (config.clip_norm > 0.0) nk::clip_grad_norm(params, config.clip_norm);
      adam.step(params);
      result.batch_losses.push_back(value);
      total += value;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = batches.empty() ? 0.0 : total / batches.size();
    record.heldout = hooks.heldout_metric();
    result.epochs.push_back(record);
    if (record.heldout < result.best_heldout) {
      result.best_heldout = record.heldout;
      result.best_epoch = epoch;
      for (std::size_t k = 0; k < params.size(); ++k) best[k] = params[k]->value;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  return result;
}

}  // namespace cflm
