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

// A noisy-channel ASR simulator with a fully known error model.
//
// Each reference word is independently deleted (probability del), replaced
// by a draw from its confusion distribution (probability rho), or emitted
// unchanged. After every reference position one word is inserted with
// probability ins_prob. In context mode rho doubles (capped at 1 - del) for
// a word that follows the trigger word in the reference.

#ifndef CFLM_ASRSIM_H_
#define CFLM_ASRSIM_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cflm/corpus.h"
#include "json.hpp"

namespace cflm {

struct WeightedWord {
  TokenId word;
  double prob;
};

struct WordChannel {
  double rho = 0.0;
  double del = 0.0;
  std::vector<WeightedWord> confusions;
};

class ChannelModel {
 public:
  ChannelModel() = default;
  explicit ChannelModel(std::size_t vocab_size);

  std::size_t vocab_size() const { return words_.size(); }

  void set_substitution(TokenId word, double rho,
                        std::vector<WeightedWord> confusions);
  void set_deletion(TokenId word, double prob);
  void set_insertion(double prob, std::vector<WeightedWord> distribution);
  void set_context_trigger(std::optional<TokenId> trigger) {
    trigger_ = trigger;
  }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  const WordChannel& word(TokenId w) const;
  double insertion_prob() const { return ins_prob_; }
  const std::vector<WeightedWord>& insertion_distribution() const {
    return ins_dist_;
  }
  double insertion_weight(TokenId w) const;
  double confusion_prob(TokenId from, TokenId to) const;
  std::optional<TokenId> context_trigger() const { return trigger_; }
  std::uint64_t seed() const { return seed_; }

  // Substitution mass of `w` following reference word `prev` (kBos at the
  // sentence start).
  double rho(TokenId w, TokenId prev) const;
  double del(TokenId w) const { return word(w).del; }

  // Words that can be turned into `emitted` by substitution, with the
  // joint probability rho(w) * P(emitted | w) (context ignored).
  const std::vector<WeightedWord>& sources_of(TokenId emitted) const;

  // Throws cflm::Error describing the first violated constraint.
  void validate() const;

  // log P(output | input), summed over every derivation.
  double log_prob(std::span<const TokenId> output,
                  std::span<const TokenId> input) const;

  static ChannelModel from_json(const nlohmann::json& config,
                                const Vocabulary& vocab);
  nlohmann::json to_json(const Vocabulary& vocab) const;
  static ChannelModel load(const std::filesystem::path& path,
                           const Vocabulary& vocab);
  void save(const std::filesystem::path& path, const Vocabulary& vocab) const;

 private:
  void rebuild_reverse_index();

  std::vector<WordChannel> words_;
  double ins_prob_ = 0.0;
  std::vector<WeightedWord> ins_dist_;
  std::vector<double> ins_weight_;  // dense by word id
  std::optional<TokenId> trigger_;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<WeightedWord>> sources_;  // by emitted word
};

WordSequence corrupt(const WordSequence& reference, const ChannelModel& channel,
                     Rng& rng);

// 1 - P(word t emitted correctly), exact for insertion-free channels.
// Throws for channels with ins_prob > 0.
double exact_fallibility(const WordSequence& reference, std::size_t t,
                         const ChannelModel& channel);

// Fraction of corrupt + edit_align + annotate runs labelling position t.
// Deterministic in the channel seed.
double monte_carlo_fallibility(const WordSequence& reference, std::size_t t,
                               const ChannelModel& channel, int samples);

struct NBestEntry {
  WordSequence hypothesis;
  double asr_score = 0.0;
};

struct NBestList {
  // Sorted by asr_score, descending. Hypotheses are distinct.
  std::vector<NBestEntry> entries;
  // The corrupted observation the list was decoded from.
  WordSequence evidence;
  // Set when fewer than n distinct hypotheses were reachable.
  bool truncated = false;
};

// Simulated first-pass decoding. The reference is corrupted once to form
// the observation; candidate transcripts are proposed by undoing likely
// channel edits and each is scored by the exact channel log-likelihood
// log P(observation | candidate). The reference itself is never consulted
// after the corruption step.
NBestList decode_nbest(const WordSequence& reference,
                       const ChannelModel& channel, int n, Rng& rng);

// Candidate search around a fixed observation.
NBestList decode_observation(const WordSequence& observation,
                             const ChannelModel& channel, int n);

// Add-one smoothed unigram log-probabilities over word ids [0, vocab_size).
std::vector<double> unigram_log_prior(const std::vector<WordSequence>& corpus,
                                      std::size_t vocab_size);

// Folds a first-pass language-model term weight * sum(log_prior[w]) into
// every asr_score and re-sorts the list.
void add_first_pass_prior(NBestList& list, std::span<const double> log_prior,
                          double weight);

// {"ref_id": i, "hyps": [{"text": "...", "score": -1.23}, ...]}
void write_nbest_jsonl(const std::vector<NBestList>& lists,
                       const Vocabulary& vocab,
                       const std::filesystem::path& path);
std::vector<NBestList> read_nbest_jsonl(const std::filesystem::path& path,
                                        const Vocabulary& vocab);

}  // namespace cflm

#endif  // CFLM_ASRSIM_H_
