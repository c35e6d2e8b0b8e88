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


// Shallow fusion approximated by n-best rescoring, and WER evaluation.

#ifndef CFLM_FUSION_H_
#define CFLM_FUSION_H_

#include <span>
#include <vector>

#include "cflm/asrsim.h"
#include "cflm/nnlm.h"
#include "json.hpp"

namespace cflm {

struct FusionConfig {
  double beta = 0.5;
  int n = 8;
  // Divide the LM log-probability by the hypothesis length plus one.
  bool length_normalize = false;

  void validate() const;
  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
};

// LM log-probability of every hypothesis in the list.
std::vector<double> lm_scores(const NBestList& nbest, const NnlmModel& model);

// asr_score + beta * lm for entry k.
double combined_score(const NBestList& nbest, std::span<const double> lm,
                      std::size_t k, const FusionConfig& config);

// Index of the best combined score; ties go to the earlier rank.
std::size_t choose_hypothesis(const NBestList& nbest,
                              std::span<const double> lm,
                              const FusionConfig& config);

WordSequence fuse_rescore(const NBestList& nbest, const NnlmModel& model,
                          const FusionConfig& config);

struct WerReport {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long reference_words = 0;
  double wer = 0.0;

  nlohmann::json to_json() const;
};

WerReport evaluate_wer(const std::vector<WordSequence>& references,
                       const std::vector<WordSequence>& hypotheses);

// (baseline - wer) / baseline; 0 when the baseline is 0.
double relative_reduction(double baseline, double wer);

// Cached LM scores for a set of n-best lists, reusable across beta values.
struct ScoredNBest {
  std::vector<NBestList> lists;
  std::vector<std::vector<double>> lm;
};

ScoredNBest score_nbest_lists(std::vector<NBestList> lists,
                              const NnlmModel& model);

std::vector<WordSequence> rescore_all(const ScoredNBest& scored,
                                      const FusionConfig& config);

struct BetaSearch {
  double best_beta = 0.0;
  std::vector<double> grid;
  std::vector<double> wer;  // per grid entry
};

// Picks the grid value with the lowest WER; ties go to the smaller beta.
BetaSearch tune_beta(const ScoredNBest& dev,
                     const std::vector<WordSequence>& references,
                     std::span<const double> grid, FusionConfig base);

}  // namespace cflm

#endif  // CFLM_FUSION_H_
