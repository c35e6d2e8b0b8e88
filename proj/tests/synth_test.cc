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


#include "cflm/synth.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cflm/asrsim.h"
#include "cflm/corpus.h"

namespace cflm {
namespace {

SyntheticDomainConfig small_domain(std::uint64_t seed) {
  SyntheticDomainConfig c;
  c.seed = seed;
  c.topics = 3;
  c.subjects_per_topic = 4;
  c.verbs_per_topic = 4;
  c.objects_per_topic = 6;
  c.generic_per_slot = 2;
  return c;
}

bool has_hard_syllable(const std::string& word,
                       const std::vector<std::string>& hard) {
  for (const auto& h : hard) {
    if (word.find(h) != std::string::npos) return true;
  }
  return false;
}

TEST(SyntheticDomainTest, SamplingIsSeeded) {
  const SyntheticDomain a(small_domain(3), 7);
  const SyntheticDomain b(small_domain(3), 7);
  EXPECT_EQ(a.words(), b.words());
  EXPECT_EQ(a.fallible(), b.fallible());
  Rng ra(11), rb(11);
  EXPECT_EQ(a.sample(50, ra), b.sample(50, rb));
  EXPECT_NE(SyntheticDomain(small_domain(4), 7).words(), a.words());
}

TEST(SyntheticDomainTest, SentencesFollowTheTemplate) {
  const SyntheticDomain d(small_domain(1), 1);
  const std::set<std::string> vocab(d.words().begin(), d.words().end());
  Rng rng(2);
  int long_form = 0;
  for (const auto& s : d.sample(500, rng)) {
    ASSERT_TRUE(s.size() == 3 || s.size() == 5);
    if (s.size() == 5) {
      EXPECT_EQ(s[3], "with");
      ++long_form;
    }
    for (const auto& w : s) EXPECT_TRUE(vocab.count(w)) << w;
  }
  EXPECT_NEAR(long_form / 500.0, d.config().tail_prob, 0.07);
}

TEST(SyntheticDomainTest, FallibleWordsHaveReliablePartners) {
  const SyntheticDomain d(small_domain(5), 9);
  EXPECT_FALSE(d.fallible().empty());
  EXPECT_EQ(d.partners().size(), d.fallible().size());
  for (const auto& [w, partner] : d.partners()) {
    EXPECT_TRUE(d.fallible().count(w));
    EXPECT_FALSE(d.fallible().count(partner));
    EXPECT_NE(w, partner);
  }
  EXPECT_GT(d.fallible_type_fraction(), 0.0);
  EXPECT_LT(d.fallible_type_fraction(), 0.5);
}

TEST(SyntheticDomainTest, SharedFallibleWordsCarryHardSyllables) {
  const auto hard = hard_syllables(9);
  EXPECT_EQ(hard, hard_syllables(9));
  const SyntheticDomain a(small_domain(5), 9);
  const SyntheticDomain b(small_domain(6), 9);
  for (const SyntheticDomain* d : {&a, &b}) {
    EXPECT_FALSE(d->shared_fallible().empty());
    for (const auto& w : d->words()) {
      EXPECT_EQ(has_hard_syllable(w, hard), d->shared_fallible().count(w) == 1) << w;
    }
  }
}

std::set<std::string> syllables_of(const SyntheticDomain& d) {
  std::set<std::string> out;
  for (const auto& w : d.words()) {
    if (w.size() != 6) continue;
    out.insert(w.substr(0, 3));
    out.insert(w.substr(3));
  }
  return out;
}

TEST(SyntheticDomainTest, SharedInventoryKeepsWordsApart) {
  auto ca = small_domain(5);
  auto cb = small_domain(6);
  ca.shared_inventory = cb.shared_inventory = true;
  ca.syllables = cb.syllables = 12;
  const SyntheticDomain a(ca, 9);
  const SyntheticDomain b(cb, 9);
  const auto hard = hard_syllables(9);
  std::set<std::string> inventory = syllables_of(a);
  for (const auto& s : syllables_of(b)) inventory.insert(s);
  for (const auto& h : hard) inventory.erase(h);
  EXPECT_LE(inventory.size(), 12u);
  EXPECT_NE(a.words(), b.words());

  ca.shared_inventory = cb.shared_inventory = false;
  std::set<std::string> apart = syllables_of(SyntheticDomain(ca, 9));
  for (const auto& s : syllables_of(SyntheticDomain(cb, 9))) apart.insert(s);
  for (const auto& h : hard) apart.erase(h);
  EXPECT_GT(apart.size(), 12u);
}

TEST(SyntheticDomainTest, ChannelMatchesTheDomain) {
  SyntheticDomainConfig c = small_domain(2);
  c.fallible_rho = 0.6;
  c.fallible_del = 0.05;
  const SyntheticDomain d(c, 1);
  const Vocabulary vocab = Vocabulary::from_tokens(d.words());
  const ChannelModel channel = ChannelModel::from_json(d.channel_json(), vocab);
  channel.validate();
  for (const auto& [w, partner] : d.partners()) {
    const TokenId id = vocab.id(w);
    EXPECT_DOUBLE_EQ(channel.word(id).rho, 0.6);
    EXPECT_DOUBLE_EQ(channel.word(id).del, 0.05);
    EXPECT_DOUBLE_EQ(channel.confusion_prob(id, vocab.id(partner)), 1.0);
  }
  EXPECT_DOUBLE_EQ(channel.word(vocab.id("with")).rho, 0.0);
}

TEST(SyntheticDomainTest, InvalidConfigsAreRejected) {
  SyntheticDomainConfig c = small_domain(1);
  c.topics = 1;
  EXPECT_THROW(SyntheticDomain(c, 1), Error);
  c = small_domain(1);
  c.fallible_rho = 0.9;
  c.fallible_del = 0.2;
  EXPECT_THROW(SyntheticDomain(c, 1), Error);
  c = small_domain(1);
  c.generic_share = -0.1;
  EXPECT_THROW(SyntheticDomain(c, 1), Error);
}

TEST(SyntheticDomainTest, ConfigRoundTrip) {
  SyntheticDomainConfig c = small_domain(8);
  c.fallible_min_rank = 2;
  c.zipf = 1.3;
  const auto back = SyntheticDomainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(FirstPassPriorTest, UnigramPriorIsSmoothedAndNormalized) {
  const std::vector<WordSequence> corpus = {WordSequence{{3, 3, 4}}};
  const auto prior = unigram_log_prior(corpus, 5);
  double total = 0.0;
  for (double lp : prior) total += std::exp(lp);
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(prior[3], std::log(3.0 / 8.0), 1e-12);
  EXPECT_NEAR(prior[0], std::log(1.0 / 8.0), 1e-12);
}

TEST(FirstPassPriorTest, PriorReordersList) {
  NBestList list;
  list.entries = {{WordSequence{{3}}, -1.0}, {WordSequence{{4}}, -1.5}};
  const std::vector<double> prior = {0, 0, 0, -2.0, -0.5};
  NBestList zero = list;
  add_first_pass_prior(zero, prior, 0.0);
  EXPECT_EQ(zero.entries[0].asr_score, -1.0);
  add_first_pass_prior(list, prior, 1.0);
  EXPECT_EQ(list.entries[0].hypothesis.words, std::vector<TokenId>{4});
  EXPECT_DOUBLE_EQ(list.entries[0].asr_score, -2.0);
  EXPECT_DOUBLE_EQ(list.entries[1].asr_score, -3.0);
  EXPECT_THROW(add_first_pass_prior(list, prior, -1.0), Error);
}

}  // namespace
}  // namespace cflm
