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


// Seeded synthetic text domains with a matching ASR channel.
//
// A domain has topics. Each sentence picks a topic and fills the template
// "SUBJECT VERB OBJECT [with OBJECT]" from that topic's word
// lists, from the domain's generic words, or occasionally from another
// topic. Words are two-syllable pseudo-words. A fraction of topic words is
// fallible: the channel replaces them with a generic word of the same slot.
// Half of the fallible words contain a "hard" syllable drawn from a pool
// shared by every domain built with the same shared seed.

#ifndef CFLM_SYNTH_H_
#define CFLM_SYNTH_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cflm/common.h"
#include "json.hpp"

namespace cflm {

struct SyntheticDomainConfig {
  std::uint64_t seed = 1;
  int topics = 6;
  int subjects_per_topic = 5;
  int verbs_per_topic = 5;
  int objects_per_topic = 8;
  int generic_per_slot = 4;
  // Per-slot probability of a generic word, then of another topic's word.
  double generic_share = 0.1;
  double cross_topic = 0.05;
  // Within-list frequency exponent.
  double zipf = 1.0;
  double tail_prob = 0.4;
  // Fraction of each topic word list made fallible, drawn from the ranks
  // at or below fallible_min_rank (0 is the most frequent).
  double fallible_fraction = 0.25;
  int fallible_min_rank = 0;
  double shared_fallible_share = 0.5;
  double fallible_rho = 0.7;
  double fallible_del = 0.02;
  double background_rho = 0.02;
  double insertion_prob = 0.0;
  int syllables = 60;
  // Draw the syllable inventory from the shared seed instead of `seed`.
  bool shared_inventory = false;

  nlohmann::json to_json() const;
  static SyntheticDomainConfig from_json(const nlohmann::json& j);
};

enum class Slot { kSubject = 0, kVerb = 1, kObject = 2 };

class SyntheticDomain {
 public:
  SyntheticDomain(const SyntheticDomainConfig& config,
                  std::uint64_t shared_seed);

  const SyntheticDomainConfig& config() const { return config_; }

  // Every word the domain can emit, in a fixed order.
  const std::vector<std::string>& words() const { return words_; }
  const std::set<std::string>& fallible() const { return fallible_; }
  const std::map<std::string, std::string>& partners() const {
    return partners_;
  }
  // Fallible words built around a shared hard syllable.
  const std::set<std::string>& shared_fallible() const {
    return shared_fallible_;
  }

  std::vector<std::string> sample_sentence(Rng& rng) const;
  std::vector<std::vector<std::string>> sample(std::size_t n, Rng& rng) const;

  // Channel configuration in the word-keyed format ChannelModel::from_json
  // reads.
  nlohmann::json channel_json() const;

  // Fraction of word types that are fallible.
  double fallible_type_fraction() const;

 private:
  std::size_t draw_rank(std::size_t size, Rng& rng) const;
  const std::string& draw(Slot slot, int topic, Rng& rng) const;

  SyntheticDomainConfig config_;
  // [slot][topic] word lists, most frequent first.
  std::vector<std::vector<std::vector<std::string>>> topic_words_;
  std::vector<std::vector<std::string>> generic_words_;  // [slot]
  std::vector<std::string> words_;
  std::set<std::string> fallible_;
  std::set<std::string> shared_fallible_;
  std::map<std::string, std::string> partners_;
  std::map<std::string, std::vector<std::string>> background_;
};

// Hard syllables shared by all domains built from `shared_seed`.
std::vector<std::string> hard_syllables(std::uint64_t shared_seed);

}  // namespace cflm

#endif  // CFLM_SYNTH_H_
