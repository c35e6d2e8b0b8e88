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


// Fallibility score predictor: a recurrent token classifier over subword
// tokens trained on annotated pairs, and the subword -> word -> NNLM-token
// score assembly.

#ifndef CFLM_PREDICTOR_H_
#define CFLM_PREDICTOR_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cflm/align.h"
#include "cflm/corpus.h"
#include "cflm/rnn.h"
#include "cflm/train.h"

namespace cflm {

enum class ContextMode { kBidirectional, kCausal };

std::string_view to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view text);

struct PredictorConfig {
  int chunk_len = 3;
  int embed_dim = 24;
  int hidden_dim = 32;
  int layers = 2;
  ContextMode mode = ContextMode::kBidirectional;
  TrainConfig train;

  nlohmann::json to_json() const;
  static PredictorConfig from_json(const nlohmann::json& j);
};

class PredictorModel {
 public:
  // Fresh model; the classification head starts at zero, so every score is
  // 0.5 until trained.
  PredictorModel(const Vocabulary& words, const PredictorConfig& config);

  const PredictorConfig& config() const { return config_; }
  const SubwordTokenizer& tokenizer() const { return tokenizer_; }

  // Subword tokens of `text` followed by <eos>.
  std::vector<TokenId> input_tokens(const WordSequence& text) const;
  // P(error) at every input position.
  std::vector<double> predict(std::span<const TokenId> inputs) const;

  // Mean over the batch of the per-sequence mean token cross-entropy.
  nk::Var batch_loss(nk::Tape& tape,
                     const std::vector<std::vector<TokenId>>& inputs,
                     const std::vector<std::vector<Label>>& labels);

  nk::ParameterRefs parameters();

  // Writes config.json, vocab.txt and weights.ckpt under dir.
  void save(const std::filesystem::path& dir) const;
  static PredictorModel load(const std::filesystem::path& dir);

 private:
  PredictorConfig config_;
  SubwordTokenizer tokenizer_;
  RnnTrunk forward_;
  RnnTrunk backward_;
  Linear head_;
};

struct PredictorReport {
  TrainResult training;
  std::vector<std::string> warnings;
};

// Keeps the epoch with the lowest held-out loss.
PredictorModel train_predictor(const std::vector<AnnotatedPair>& corpus,
                               const Vocabulary& words,
                               const PredictorConfig& config,
                               PredictorReport* report = nullptr);

// Mean per-sequence token cross-entropy on labelled pairs.
double predictor_loss(const PredictorModel& model,
                      const std::vector<AnnotatedPair>& pairs);

// One score per subword token of `text`, then one for <eos>.
std::vector<double> predict_scores(const PredictorModel& model,
                                   const WordSequence& text);

// Word score = max over the word's span; the trailing <eos> score passes
// through.
std::vector<double> assemble_word_scores(std::span<const double> token_scores,
                                         std::span<const Span> spans);

// Every NNLM token takes its word's score; <eos> passes through.
std::vector<double> split_to_nnlm_tokens(std::span<const double> word_scores,
                                         const TokenizedSequence& nnlm_tokens);

ScoredSequence score_sequence(const PredictorModel& model,
                              const WordSequence& text);
std::vector<ScoredSequence> score_corpus(const PredictorModel& model,
                                         const std::vector<WordSequence>& corpus);

}  // namespace cflm

#endif  // CFLM_PREDICTOR_H_
