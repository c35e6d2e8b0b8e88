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


// Correction-focused NNLM: a recurrent LM trained with per-token weights
// alpha^s, where s is the token's fallibility score, plus perplexity and
// continuation scoring for fusion.

#ifndef CFLM_NNLM_H_
#define CFLM_NNLM_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cflm/corpus.h"
#include "cflm/rnn.h"
#include "cflm/train.h"

namespace cflm {

// alpha^s for s in [0, 1], alpha >= 1.
double token_weight(double score, double alpha);

enum class Objective { kCorrectionFocused, kConventional };
enum class Granularity { kWord, kSubword };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);
std::string_view to_string(Granularity granularity);
Granularity parse_granularity(std::string_view text);

struct NnlmConfig {
  int embed_dim = 32;
  int hidden_dim = 64;
  int layers = 2;
  Granularity granularity = Granularity::kWord;
  int chunk_len = 3;
  double alpha = 3.0;
  // Weight the <eos> target by its own score; otherwise it weighs 1.
  bool use_eos_weight = true;
  // Rescale each batch's weights to mean 1.
  bool renormalize_weights = false;
  // kConventional ignores scores entirely.
  Objective objective = Objective::kCorrectionFocused;
  TrainConfig train;

  nlohmann::json to_json() const;
  static NnlmConfig from_json(const nlohmann::json& j);
};

class NnlmModel {
 public:
  NnlmModel(const Vocabulary& words, const NnlmConfig& config);

  const NnlmConfig& config() const { return config_; }
  const Vocabulary& words() const { return words_; }
  // Size of the token vocabulary the model predicts over.
  std::size_t token_vocab_size() const;

  TokenizedSequence tokenize(const WordSequence& text) const;
  // Target weights for one sequence (one per token plus <eos>), before the
  // 1/|z| normalization.
  std::vector<double> target_weights(const ScoredSequence& seq) const;

  // Per sequence: sum_j w_j * -log P(z_j | z_<j), with w already holding
  // alpha^s / |z| / B. Sequences have equal length; <bos> is prepended and
  // <eos> is the last target.
  nk::Var batch_loss(nk::Tape& tape,
                     const std::vector<const std::vector<TokenId>*>& tokens,
                     const std::vector<std::vector<double>>& weights);

  // log P(z_j | z_<j) for every token and then <eos>.
  std::vector<double> token_log_probs(std::span<const TokenId> tokens) const;
  // Sum of token_log_probs over the tokenization of `text`.
  double log_prob(const WordSequence& text) const;
  // log_prob of every text, computed in row batches.
  std::vector<double> log_probs(const std::vector<WordSequence>& texts) const;
  std::vector<double> token_sequence_log_probs(
      const std::vector<std::vector<TokenId>>& tokens) const;
  // Token count (including <eos>) of every text.
  std::size_t target_count(const WordSequence& text) const;
  // Full next-token log-distribution after <bos> + prefix.
  nk::RowVector next_log_probs(std::span<const TokenId> prefix) const;
  double score_continuation(std::span<const TokenId> prefix,
                            TokenId next) const;

  nk::ParameterRefs parameters();

  void save(const std::filesystem::path& dir) const;
  static NnlmModel load(const std::filesystem::path& dir);

 private:
  NnlmConfig config_;
  Vocabulary words_;
  std::optional<SubwordTokenizer> subwords_;
  RnnTrunk trunk_;
  Linear head_;
};

struct ScoredSource {
  std::vector<ScoredSequence> corpus;
  double mix_weight = 1.0;
};

struct NnlmReport {
  TrainResult training;

  // One {"epoch", "train_weighted_loss", "heldout_ppl"} record per epoch.
  std::vector<nlohmann::json> log_records() const;
};

// Batches draw their source with probability proportional to mix_weight.
// The checkpoint with the lowest held-out unweighted perplexity is kept.
NnlmModel train_nnlm(const std::vector<ScoredSource>& sources,
                     const Vocabulary& words, const NnlmConfig& config,
                     NnlmReport* report = nullptr);

// exp of the mean token NLL, <eos> included.
double perplexity(const NnlmModel& model,
                  const std::vector<WordSequence>& corpus);

}  // namespace cflm

#endif  // CFLM_NNLM_H_
