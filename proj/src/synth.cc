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

#include <algorithm>
#include <cmath>

namespace cflm {
namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr int kHardSyllables = 16;
const std::vector<std::string> kFunctionWords = {"the", "with"};

std::vector<std::string> all_syllables() {
  std::vector<std::string> out;
  for (char a : kConsonants) {
    for (char v : kVowels) {
      for (char b : kConsonants) out.push_back(std::string{a, v, b});
    }
  }
  return out;
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(std::string("synthetic domain: ") + name + " must be in [0, 1]");
  }
}

}  // namespace

nlohmann::json SyntheticDomainConfig::to_json() const {
  return {{"seed", seed},
          {"topics", topics},
          {"subjects_per_topic", subjects_per_topic},
          {"verbs_per_topic", verbs_per_topic},
          {"objects_per_topic", objects_per_topic},
          {"generic_per_slot", generic_per_slot},
          {"generic_share", generic_share},
          {"cross_topic", cross_topic},
          {"zipf", zipf},
          {"tail_prob", tail_prob},
          {"fallible_fraction", fallible_fraction},
          {"fallible_min_rank", fallible_min_rank},
          {"shared_fallible_share", shared_fallible_share},
          {"fallible_rho", fallible_rho},
          {"fallible_del", fallible_del},
          {"background_rho", background_rho},
          {"insertion_prob", insertion_prob},
          {"syllables", syllables},
          {"shared_inventory", shared_inventory}};
}

SyntheticDomainConfig SyntheticDomainConfig::from_json(const nlohmann::json& j) {
  SyntheticDomainConfig c;
  c.seed = j.value("seed", c.seed);
  c.topics = j.value("topics", c.topics);
  c.subjects_per_topic = j.value("subjects_per_topic", c.subjects_per_topic);
  c.verbs_per_topic = j.value("verbs_per_topic", c.verbs_per_topic);
  c.objects_per_topic = j.value("objects_per_topic", c.objects_per_topic);
  c.generic_per_slot = j.value("generic_per_slot", c.generic_per_slot);
  c.generic_share = j.value("generic_share", c.generic_share);
  c.cross_topic = j.value("cross_topic", c.cross_topic);
  c.zipf = j.value("zipf", c.zipf);
  c.tail_prob = j.value("tail_prob", c.tail_prob);
  c.fallible_fraction = j.value("fallible_fraction", c.fallible_fraction);
  c.fallible_min_rank = j.value("fallible_min_rank", c.fallible_min_rank);
  c.shared_fallible_share =
      j.value("shared_fallible_share", c.shared_fallible_share);
  c.fallible_rho = j.value("fallible_rho", c.fallible_rho);
  c.fallible_del = j.value("fallible_del", c.fallible_del);
  c.background_rho = j.value("background_rho", c.background_rho);
  c.insertion_prob = j.value("insertion_prob", c.insertion_prob);
  c.syllables = j.value("syllables", c.syllables);
  c.shared_inventory = j.value("shared_inventory", c.shared_inventory);
  return c;
}

std::vector<std::string> hard_syllables(std::uint64_t shared_seed) {
  auto pool = all_syllables();
  Rng rng(derive_seed(shared_seed, "hard-syllables"));
  rng.shuffle(std::span<std::string>(pool));
  pool.resize(kHardSyllables);
  return pool;
}

SyntheticDomain::SyntheticDomain(const SyntheticDomainConfig& config,
                                 std::uint64_t shared_seed)
    : config_(config) {
  if (config.topics < 2 || config.subjects_per_topic < 1 ||
      config.verbs_per_topic < 1 || config.objects_per_topic < 1 ||
      config.generic_per_slot < 1) {
    throw Error("synthetic domain: needs >= 2 topics and non-empty word lists");
  }
  check_fraction(config.generic_share, "generic_share");
  check_fraction(config.cross_topic, "cross_topic");
  check_fraction(config.generic_share + config.cross_topic,
                 "generic_share + cross_topic");
  check_fraction(config.tail_prob, "tail_prob");
  check_fraction(config.fallible_fraction, "fallible_fraction");
  check_fraction(config.shared_fallible_share, "shared_fallible_share");
  check_fraction(config.fallible_rho + config.fallible_del,
                 "fallible_rho + fallible_del");
  check_fraction(config.background_rho, "background_rho");
  if (config.fallible_min_rank < 0) {
    throw Error("synthetic domain: fallible_min_rank must be >= 0");
  }
  check_fraction(config.insertion_prob, "insertion_prob");
  if (config.syllables < 8) throw Error("synthetic domain: too few syllables");

  const auto hard = hard_syllables(shared_seed);
  std::vector<std::string> pool;
  for (const auto& s : all_syllables()) {
    if (std::find(hard.begin(), hard.end(), s) == hard.end()) pool.push_back(s);
  }
  Rng rng(derive_seed(config.seed, "domain"));
  if (config.shared_inventory) {
    Rng inventory(derive_seed(shared_seed, "syllable-inventory"));
    inventory.shuffle(std::span<std::string>(pool));
  } else {
    rng.shuffle(std::span<std::string>(pool));
  }
  if (static_cast<std::size_t>(config.syllables) > pool.size()) {
    throw Error("synthetic domain: too many syllables requested");
  }
  pool.resize(static_cast<std::size_t>(config.syllables));

  std::set<std::string> used(kFunctionWords.begin(), kFunctionWords.end());
  auto fresh_word = [&](bool with_hard) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      std::string a = pool[rng.index(pool.size())];
      std::string b = pool[rng.index(pool.size())];
      if (with_hard) {
        const std::string& h = hard[rng.index(hard.size())];
        (rng.bernoulli(0.5) ? a : b) = h;
      }
      std::string w = a + b;
      if (used.insert(w).second) return w;
    }
    throw Error("synthetic domain: word space exhausted");
  };

  const int per_slot[3] = {config.subjects_per_topic, config.verbs_per_topic,
                           config.objects_per_topic};
  topic_words_.assign(3, {});
  generic_words_.assign(3, {});
  for (int s = 0; s < 3; ++s) {
    for (int g = 0; g < config.generic_per_slot; ++g) {
      generic_words_[s].push_back(fresh_word(false));
    }
  }
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < config.topics; ++t) {
      const int size = per_slot[s];
      std::vector<int> ranks;
      for (int r = std::min(config.fallible_min_rank, size - 1); r < size; ++r) {
        ranks.push_back(r);
      }
      rng.shuffle(std::span<int>(ranks));
      const auto n_fallible = std::min(
          ranks.size(),
          static_cast<std::size_t>(std::lround(config.fallible_fraction * size)));
      std::vector<char> is_fallible(static_cast<std::size_t>(size), 0);
      for (std::size_t k = 0; k < n_fallible; ++k) is_fallible[ranks[k]] = 1;
      std::vector<std::string> list;
      for (int r = 0; r < size; ++r) {
        const bool shared =
            is_fallible[r] && rng.bernoulli(config.shared_fallible_share);
        std::string w = fresh_word(shared);
        if (is_fallible[r]) {
          fallible_.insert(w);
          if (shared) shared_fallible_.insert(w);
          partners_[w] = generic_words_[s][rng.index(generic_words_[s].size())];
        }
        list.push_back(std::move(w));
      }
      topic_words_[s].push_back(std::move(list));
    }
  }

  // Background confusions: two same-slot words from other topics.
  for (int s = 0; s < 3; ++s) {
    auto confusable = [&](int topic) {
      int other = (topic + 1 + static_cast<int>(rng.index(
                                    static_cast<std::size_t>(config.topics - 1)))) %
                  config.topics;
      const auto& list = topic_words_[s][static_cast<std::size_t>(other)];
      return list[rng.index(list.size())];
    };
    for (const auto& g : generic_words_[s]) {
      background_[g] = {confusable(0), confusable(1)};
    }
    for (int t = 0; t < config.topics; ++t) {
      for (const auto& w : topic_words_[s][static_cast<std::size_t>(t)]) {
        if (!fallible_.count(w)) background_[w] = {confusable(t), confusable(t)};
      }
    }
  }

  words_ = kFunctionWords;
  for (int s = 0; s < 3; ++s) {
    words_.insert(words_.end(), generic_words_[s].begin(), generic_words_[s].end());
    for (const auto& list : topic_words_[s]) {
      words_.insert(words_.end(), list.begin(), list.end());
    }
  }
}

std::size_t SyntheticDomain::draw_rank(std::size_t size, Rng& rng) const {
  std::vector<double> weights(size);
  for (std::size_t k = 0; k < size; ++k) {
    weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), config_.zipf);
  }
  return rng.categorical(weights);
}

const std::string& SyntheticDomain::draw(Slot slot, int topic, Rng& rng) const {
  const auto s = static_cast<std::size_t>(slot);
  const double u = rng.uniform();
  if (u < config_.generic_share) {
    return generic_words_[s][draw_rank(generic_words_[s].size(), rng)];
  }
  if (u < config_.generic_share + config_.cross_topic) {
    topic = (topic + 1 +
             static_cast<int>(rng.index(static_cast<std::size_t>(config_.topics - 1)))) %
            config_.topics;
  }
  const auto& list = topic_words_[s][static_cast<std::size_t>(topic)];
  return list[draw_rank(list.size(), rng)];
}

std::vector<std::string> SyntheticDomain::sample_sentence(Rng& rng) const {
  const int topic =
      static_cast<int>(rng.index(static_cast<std::size_t>(config_.topics)));
  std::vector<std::string> out = {draw(Slot::kSubject, topic, rng),
                                  draw(Slot::kVerb, topic, rng),
                                  draw(Slot::kObject, topic, rng)};
  if (rng.bernoulli(config_.tail_prob)) {
    out.push_back("with");
    out.push_back(draw(Slot::kObject, topic, rng));
  }
  return out;
}

std::vector<std::vector<std::string>> SyntheticDomain::sample(std::size_t n,
                                                              Rng& rng) const {
  std::vector<std::vector<std::string>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(sample_sentence(rng));
  return out;
}

nlohmann::json SyntheticDomain::channel_json() const {
  nlohmann::json sub = nlohmann::json::object();
  nlohmann::json del = nlohmann::json::object();
  for (const auto& [w, partner] : partners_) {
    sub[w] = {{"rho", config_.fallible_rho}, {"confusions", {{partner, 1.0}}}};
    if (config_.fallible_del > 0.0) del[w] = config_.fallible_del;
  }
  if (config_.background_rho > 0.0) {
    for (const auto& [w, targets] : background_) {
      nlohmann::json conf = nlohmann::json::object();
      for (const auto& t : targets) {
        conf[t] = conf.value(t, 0.0) + 1.0 / static_cast<double>(targets.size());
      }
      sub[w] = {{"rho", config_.background_rho}, {"confusions", conf}};
    }
  }
  nlohmann::json ins = {{"prob", config_.insertion_prob},
                        {"words", {{"the", 1.0}}}};
  return {{"sub", sub},
          {"del", del},
          {"ins", ins},
          {"seed", derive_seed(config_.seed, "channel")}};
}

double SyntheticDomain::fallible_type_fraction() const {
  return static_cast<double>(fallible_.size()) /
         static_cast<double>(words_.size());
}

}  // namespace cflm
