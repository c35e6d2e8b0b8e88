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


// End-to-end domain-adaptation experiment: synthetic domains, simulated
// ASR, fallibility prediction, text generation, NNLM training per alpha,
// n-best fusion and WER/PPL reporting.

#ifndef CFLM_EXPERIMENT_H_
#define CFLM_EXPERIMENT_H_

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cflm/fusion.h"
#include "cflm/generator.h"
#include "cflm/nnlm.h"
#include "cflm/predictor.h"
#include "cflm/synth.h"
#include "json.hpp"

namespace cflm {

struct ExperimentSizes {
  std::size_t text = 5000;
  std::size_t annotated = 500;
  std::size_t transfer_annotated = 500;
  std::size_t generator_pairs = 2000;
  std::size_t generated = 5000;
  std::size_t mismatch_text = 5000;
  std::size_t dev = 300;
  std::size_t test = 1500;
};

struct ExperimentSpec {
  std::uint64_t seed = 1;
  std::uint64_t shared_seed = 1;
  SyntheticDomainConfig target;
  SyntheticDomainConfig transfer;
  SyntheticDomainConfig mismatch;
  ExperimentSizes sizes;
  AnnotationFlags annotation;
  PredictorConfig predictor;
  GeneratorConfig generator;
  GenerationConfig generation;
  NnlmConfig nnlm;
  std::vector<double> alphas = {1.0, 3.0, 8.0};
  // Alphas for the generated-text and annotation-transfer conditions.
  std::vector<double> secondary_alphas = {1.0, 3.0};
  // NNLMs trained per alpha with seeds shared across alphas.
  int replicates = 1;
  std::vector<double> beta_grid = {0.1, 0.2, 0.5, 1.0};
  FusionConfig fusion;
  // Weight of a first-pass unigram LM (estimated on the target text) folded
  // into the simulated n-best scores.
  double first_pass_prior_weight = 0.0;
  bool real_text = true;
  bool generated_text = true;
  bool annotation_transfer = true;

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ConditionResult {
  std::string condition;  // real_text, generated_text, annotation_transfer
  std::string text;       // corpus the NNLM was trained on
  std::string scores;     // where the fallibility scores came from
  double alpha = 1.0;
  // Per replicate: tuned beta, dev WER at that beta, test WER, test PPL.
  std::vector<double> betas;
  std::vector<double> dev_wers;
  std::vector<double> wers;
  std::vector<double> ppls;
  // Errors pooled over replicates; wer is the mean replicate WER.
  WerReport test;
  double ppl = 0.0;
  // Relative WER reduction versus the alpha = 1 row of the same group.
  double rel_vs_alpha1 = 0.0;

  nlohmann::json to_json() const;
};

struct ExperimentReport {
  nlohmann::json spec;
  nlohmann::json data;  // corpus sizes, channel and domain statistics
  WerReport asr_only;
  WerReport oracle;
  std::vector<ConditionResult> rows;

  // First row matching condition/scores/alpha; throws when absent.
  const ConditionResult& find(std::string_view condition,
                              std::string_view scores, double alpha) const;
  nlohmann::json to_json() const;
  std::string table() const;
};

using ProgressFn = std::function<void(std::string_view)>;

// Throws cflm::Error prefixed with the failing stage name.
ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const ProgressFn& progress = nullptr);

}  // namespace cflm

#endif  // CFLM_EXPERIMENT_H_
