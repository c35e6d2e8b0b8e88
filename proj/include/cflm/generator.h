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


// Multi-task generator: one recurrent trunk read by an LM head that
// predicts the next word and a classification head that scores the word
// just consumed. Generation emits text and fallibility scores together,
// advancing the trunk once per token.

#ifndef CFLM_GENERATOR_H_
#define CFLM_GENERATOR_H_

#include <filesystem>
#include <string_view>
#include <vector>

#include "cflm/align.h"
#include "cflm/corpus.h"
#include "cflm/rnn.h"
#include "cflm/train.h"

namespace cflm {

struct GeneratorConfig {
  int embed_dim = 32;
  int hidden_dim = 64;
  int layers = 2;
  // Weight of the classification task in the joint loss.
  double lambda = 1.0;
  // Without the classification head the model is a plain LM.
  bool include_classifier = true;
  TrainConfig train;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

class GeneratorModel {
 public:
  GeneratorModel(const Vocabulary& vocab, const GeneratorConfig& config);

  const GeneratorConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Joint loss of a batch of equal-length annotated references: per
  // sequence -(1/|x|) sum_j [log P(x_j | x_<j) + lambda log P(y_j | x_<=j)],
  // where |x| counts the words and <eos>; averaged over the batch.
  nk::Var batch_loss(nk::Tape& tape, const std::vector<const AnnotatedPair*>& batch);

  // The same quantities without a tape, for one sequence.
  struct SequenceLoss {
    double lm = 0.0;          // sum of -log P(x_j | x_<j)
    double classifier = 0.0;  // sum of -log P(y_j | x_<=j)
    int tokens = 0;           // |x|
  };
  SequenceLoss sequence_loss(const AnnotatedPair& pair) const;

  const RnnTrunk& trunk() const { return trunk_; }
  nk::RowVector lm_logits(const nk::RowVector& state) const {
    return lm_head_.apply(state);
  }
  // Classification-head P(error) for the token whose state is given.
  double error_probability(const nk::RowVector& state) const;

  nk::ParameterRefs parameters();
  // Parameters of the classification head only (empty without one).
  nk::ParameterRefs classifier_parameters();

  void save(const std::filesystem::path& dir) const;
  static GeneratorModel load(const std::filesystem::path& dir);

 private:
  GeneratorConfig config_;
  Vocabulary vocab_;
  RnnTrunk trunk_;
  Linear lm_head_;
  Linear cls_head_;
};

struct GeneratorReport {
  TrainResult training;
  // Largest classification-head gradient norm seen in any batch.
  double max_classifier_grad_norm = 0.0;
  // LM-head perplexity on the held-out split after every epoch.
  std::vector<double> heldout_ppl;
};

GeneratorModel train_generator(const std::vector<AnnotatedPair>& corpus,
                               const Vocabulary& vocab,
                               const GeneratorConfig& config,
                               GeneratorReport* report = nullptr);

// exp of the mean LM-head NLL per token (words and <eos>).
double generator_perplexity(const GeneratorModel& model,
                            const std::vector<WordSequence>& corpus);
// Mean per-sequence classification cross-entropy.
double generator_classifier_loss(const GeneratorModel& model,
                                 const std::vector<AnnotatedPair>& pairs);

enum class DecodeMode { kGreedy, kSample, kTopK };

std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view text);

struct GenerationConfig {
  int max_len = 30;
  bool stop_at_eos = true;
  DecodeMode mode = DecodeMode::kSample;
  double temperature = 1.0;
  int top_k = 10;
  std::uint64_t seed = 1;
  int count = 100;

  nlohmann::json to_json() const;
  static GenerationConfig from_json(const nlohmann::json& j);
};

struct GenerationResult {
  std::vector<ScoredSequence> sequences;  // tagged generated
  long trunk_steps = 0;
  long dropped_empty = 0;
};

// Sequence i samples from a stream derived from (seed, i). Each kept
// sequence of n words costs n + 2 trunk steps: <bos>, every word, and the
// closing <eos>, which is consumed to obtain its score.
GenerationResult generate_scored(const GeneratorModel& model,
                                 const GenerationConfig& config);

struct FilterReport {
  long input = 0;
  long kept = 0;
  long duplicates = 0;
  long out_of_range = 0;
};

std::vector<ScoredSequence> filter_generated(
    const std::vector<ScoredSequence>& corpus, bool dedup, int min_len,
    int max_len, FilterReport* report = nullptr);

// {"requested", "generated", "dropped_empty", "kept", "duplicates",
//  "out_of_range", "mean_length", "mean_score", "trunk_steps"}
nlohmann::json generation_report(const GenerationConfig& config,
                                 const GenerationResult& result,
                                 const std::vector<ScoredSequence>& kept,
                                 const FilterReport& filter);

}  // namespace cflm

#endif  // CFLM_GENERATOR_H_
