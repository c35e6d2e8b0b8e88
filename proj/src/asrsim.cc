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

#include "cflm/asrsim.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>

#include "cflm/align.h"

namespace cflm {
namespace {

constexpr double kProbTolerance = 1e-9;

void check_prob(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(what + " = " + std::to_string(p) + " is not in [0, 1]");
  }
}

double total(const std::vector<WeightedWord>& dist) {
  double s = 0.0;
  for (const auto& ww : dist) s += ww.prob;
  return s;
}

std::vector<WeightedWord> parse_distribution(const nlohmann::json& obj,
                                             const Vocabulary& vocab,
                                             const std::string& what) {
  std::vector<WeightedWord> dist;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!vocab.contains(it.key())) {
      throw Error(what + ": unknown word '" + it.key() + "'");
    }
    dist.push_back({vocab.id(it.key()), it.value().get<double>()});
  }
  return dist;
}

nlohmann::json dump_distribution(const std::vector<WeightedWord>& dist,
                                 const Vocabulary& vocab) {
  nlohmann::json obj = nlohmann::json::object();
  for (const auto& ww : dist) obj[vocab.token(ww.word)] = ww.prob;
  return obj;
}

TokenId draw(const std::vector<WeightedWord>& dist, Rng& rng) {
  double u = rng.uniform() * total(dist);
  for (const auto& ww : dist) {
    if (u < ww.prob) return ww.word;
    u -= ww.prob;
  }
  return dist.back().word;
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : -INFINITY; }

}  // namespace

ChannelModel::ChannelModel(std::size_t vocab_size)
    : words_(vocab_size),
      ins_weight_(vocab_size, 0.0),
      sources_(vocab_size) {}

void ChannelModel::set_substitution(TokenId word, double rho,
                                    std::vector<WeightedWord> confusions) {
  WordChannel& wc = words_.at(static_cast<std::size_t>(word));
  wc.rho = rho;
  wc.confusions = std::move(confusions);
  rebuild_reverse_index();
}

void ChannelModel::set_deletion(TokenId word, double prob) {
  words_.at(static_cast<std::size_t>(word)).del = prob;
}

void ChannelModel::set_insertion(double prob,
                                 std::vector<WeightedWord> distribution) {
  ins_prob_ = prob;
  ins_dist_ = std::move(distribution);
  std::fill(ins_weight_.begin(), ins_weight_.end(), 0.0);
  for (const auto& ww : ins_dist_) {
    ins_weight_.at(static_cast<std::size_t>(ww.word)) += ww.prob;
  }
}

const WordChannel& ChannelModel::word(TokenId w) const {
  if (w < 0 || static_cast<std::size_t>(w) >= words_.size()) {
    throw Error("channel: word id " + std::to_string(w) + " out of range");
  }
  return words_[static_cast<std::size_t>(w)];
}

double ChannelModel::insertion_weight(TokenId w) const {
  return ins_weight_.at(static_cast<std::size_t>(w));
}

double ChannelModel::confusion_prob(TokenId from, TokenId to) const {
  for (const auto& ww : word(from).confusions) {
    if (ww.word == to) return ww.prob;
  }
  return 0.0;
}

double ChannelModel::rho(TokenId w, TokenId prev) const {
  const WordChannel& wc = word(w);
  if (trigger_ && prev == *trigger_) {
    return std::min(2.0 * wc.rho, 1.0 - wc.del);
  }
  return wc.rho;
}

const std::vector<WeightedWord>& ChannelModel::sources_of(
    TokenId emitted) const {
  return sources_.at(static_cast<std::size_t>(emitted));
}

void ChannelModel::rebuild_reverse_index() {
  for (auto& s : sources_) s.clear();
  for (std::size_t w = 0; w < words_.size(); ++w) {
    for (const auto& ww : words_[w].confusions) {
      if (ww.word >= 0 && static_cast<std::size_t>(ww.word) < sources_.size()) {
        sources_[ww.word].push_back(
            {static_cast<TokenId>(w), words_[w].rho * ww.prob});
      }
    }
  }
}

void ChannelModel::validate() const {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const WordChannel& wc = words_[w];
    const std::string name = "word " + std::to_string(w);
    check_prob(wc.rho, name + " rho");
    check_prob(wc.del, name + " del");
    if (wc.rho + wc.del > 1.0 + kProbTolerance) {
      throw Error(name + ": rho + del exceeds 1");
    }
    for (const auto& ww : wc.confusions) {
      check_prob(ww.prob, name + " confusion");
      if (ww.word == static_cast<TokenId>(w)) {
        throw Error(name + ": confusion set contains the word itself");
      }
      if (ww.word < 0 || static_cast<std::size_t>(ww.word) >= words_.size()) {
        throw Error(name + ": confusion id out of range");
      }
    }
    if (wc.rho > 0.0 && std::abs(total(wc.confusions) - 1.0) > kProbTolerance) {
      throw Error(name + ": confusion distribution does not sum to 1");
    }
  }
  check_prob(ins_prob_, "ins_prob");
  if (ins_prob_ > 0.0 && std::abs(total(ins_dist_) - 1.0) > kProbTolerance) {
    throw Error("insertion distribution does not sum to 1");
  }
  for (const auto& ww : ins_dist_) {
    check_prob(ww.prob, "insertion weight");
    if (ww.word < 0 || static_cast<std::size_t>(ww.word) >= words_.size()) {
      throw Error("insertion id out of range");
    }
  }
  if (trigger_ && (*trigger_ < 0 ||
                   static_cast<std::size_t>(*trigger_) >= words_.size())) {
    throw Error("context trigger out of range");
  }
}

double ChannelModel::log_prob(std::span<const TokenId> output,
                              std::span<const TokenId> input) const {
  const std::size_t m = output.size();
  // alpha[j]: probability of having produced output[0, j) so far.
  std::vector<double> alpha(m + 1, 0.0);
  std::vector<double> before(m + 1, 0.0);
  alpha[0] = 1.0;
  TokenId prev = kBos;
  for (TokenId x : input) {
    const double r = rho(x, prev);
    const double d = del(x);
    const double keep = 1.0 - r - d;
    for (std::size_t j = 0; j <= m; ++j) {
      double p = alpha[j] * d;
      if (j > 0) {
        const TokenId e = output[j - 1];
        const double emit = e == x ? keep : r * confusion_prob(x, e);
        p += alpha[j - 1] * emit;
      }
      before[j] = p;
    }
    for (std::size_t j = 0; j <= m; ++j) {
      double p = before[j] * (1.0 - ins_prob_);
      if (j > 0 && ins_prob_ > 0.0) {
        p += before[j - 1] * ins_prob_ * insertion_weight(output[j - 1]);
      }
      alpha[j] = p;
    }
    prev = x;
  }
  return safe_log(alpha[m]);
}

ChannelModel ChannelModel::from_json(const nlohmann::json& config,
                                     const Vocabulary& vocab) {
  ChannelModel channel(vocab.size());
  if (config.contains("sub")) {
    for (auto it = config["sub"].begin(); it != config["sub"].end(); ++it) {
      if (!vocab.contains(it.key())) {
        throw Error("channel sub: unknown word '" + it.key() + "'");
      }
      const auto& entry = it.value();
      channel.set_substitution(
          vocab.id(it.key()), entry.at("rho").get<double>(),
          parse_distribution(entry.at("confusions"), vocab,
                             "channel confusions of '" + it.key() + "'"));
    }
  }
  if (config.contains("del")) {
    for (const auto& ww :
         parse_distribution(config["del"], vocab, "channel del")) {
      channel.set_deletion(ww.word, ww.prob);
    }
  }
  if (config.contains("ins")) {
    const auto& ins = config["ins"];
    channel.set_insertion(
        ins.value("prob", 0.0),
        ins.contains("words")
            ? parse_distribution(ins["words"], vocab, "channel ins")
            : std::vector<WeightedWord>{});
  }
  if (config.contains("context_trigger") &&
      !config["context_trigger"].is_null()) {
    const auto trigger = config["context_trigger"].get<std::string>();
    if (!vocab.contains(trigger)) {
      throw Error("channel: unknown context trigger '" + trigger + "'");
    }
    channel.set_context_trigger(vocab.id(trigger));
  }
  channel.set_seed(config.value("seed", std::uint64_t{0}));
  channel.validate();
  return channel;
}

nlohmann::json ChannelModel::to_json(const Vocabulary& vocab) const {
  nlohmann::json sub = nlohmann::json::object();
  nlohmann::json del = nlohmann::json::object();
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const auto& wc = words_[w];
    const std::string& name = vocab.token(static_cast<TokenId>(w));
    if (wc.rho > 0.0 || !wc.confusions.empty()) {
      sub[name] = {{"rho", wc.rho},
                   {"confusions", dump_distribution(wc.confusions, vocab)}};
    }
    if (wc.del > 0.0) del[name] = wc.del;
  }
  nlohmann::json config;
  config["sub"] = sub;
  config["del"] = del;
  config["ins"] = {{"prob", ins_prob_},
                   {"words", dump_distribution(ins_dist_, vocab)}};
  config["context_trigger"] =
      trigger_ ? nlohmann::json(vocab.token(*trigger_)) : nlohmann::json();
  config["seed"] = seed_;
  return config;
}

ChannelModel ChannelModel::load(const std::filesystem::path& path,
                                const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(in), vocab);
  } catch (const nlohmann::json::exception& e) {
    throw Error("channel config " + path.string() + ": " + e.what());
  }
}

void ChannelModel::save(const std::filesystem::path& path,
                        const Vocabulary& vocab) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(vocab).dump(2) << '\n';
}

WordSequence corrupt(const WordSequence& reference, const ChannelModel& channel,
                     Rng& rng) {
  WordSequence out;
  out.tag = reference.tag;
  TokenId prev = kBos;
  for (TokenId x : reference.words) {
    const double d = channel.del(x);
    const double r = channel.rho(x, prev);
    const double u = rng.uniform();
    if (u < d) {
      // deleted
    } else if (u < d + r) {
      out.words.push_back(draw(channel.word(x).confusions, rng));
    } else {
      out.words.push_back(x);
    }
    if (channel.insertion_prob() > 0.0 &&
        rng.bernoulli(channel.insertion_prob())) {
      out.words.push_back(draw(channel.insertion_distribution(), rng));
    }
    prev = x;
  }
  return out;
}

double exact_fallibility(const WordSequence& reference, std::size_t t,
                         const ChannelModel& channel) {
  if (t >= reference.size()) {
    throw Error("exact_fallibility: position " + std::to_string(t) +
                " out of range for length " + std::to_string(reference.size()));
  }
  if (channel.insertion_prob() > 0.0) {
    throw Error(
        "exact_fallibility: channel has insertions; use "
        "monte_carlo_fallibility");
  }
  const TokenId prev = t == 0 ? kBos : reference.words[t - 1];
  const TokenId x = reference.words[t];
  return channel.rho(x, prev) + channel.del(x);
}

double monte_carlo_fallibility(const WordSequence& reference, std::size_t t,
                               const ChannelModel& channel, int samples) {
  if (samples < 1) throw Error("monte_carlo_fallibility: samples must be >= 1");
  if (t >= reference.size()) {
    throw Error("monte_carlo_fallibility: position out of range");
  }
  Rng rng(derive_seed(channel.seed(), "monte-carlo-fallibility"));
  int hits = 0;
  for (int s = 0; s < samples; ++s) {
    const WordSequence hyp = corrupt(reference, channel, rng);
    const AnnotatedPair pair =
        annotate(edit_align(reference, hyp), reference, hyp, AnnotationFlags{});
    hits += pair.word_labels[t];
  }
  return static_cast<double>(hits) / samples;
}

namespace {

// One way to explain a stretch of the observation.
struct Proposal {
  enum Kind : std::uint8_t { kNone, kKeep, kSubstitute, kDrop, kRestore };
  Kind kind;
  TokenId word;
  double score;
};

// Slots alternate gap, word, gap, ..., word, gap. A gap may restore a
// deleted word; a word slot keeps, un-substitutes, or drops the observed
// word. Options within a slot are sorted best first.
std::vector<std::vector<Proposal>> build_slots(const WordSequence& observed,
                                               const ChannelModel& channel) {
  const double ins = channel.insertion_prob();
  const double no_ins = safe_log(1.0 - ins);

  std::vector<WeightedWord> deletable;
  for (std::size_t w = kNumReserved; w < channel.vocab_size(); ++w) {
    const double d = channel.del(static_cast<TokenId>(w));
    if (d > 0.0) deletable.push_back({static_cast<TokenId>(w), d});
  }
  std::stable_sort(deletable.begin(), deletable.end(),
                   [](const auto& a, const auto& b) { return a.prob > b.prob; });
  if (deletable.size() > 3) deletable.resize(3);

  auto gap = [&] {
    std::vector<Proposal> opts{{Proposal::kNone, kUnk, 0.0}};
    for (const auto& ww : deletable) {
      opts.push_back({Proposal::kRestore, ww.word, std::log(ww.prob) + no_ins});
    }
    return opts;
  };

  std::vector<std::vector<Proposal>> slots;
  slots.push_back(gap());
  for (TokenId e : observed.words) {
    std::vector<Proposal> opts;
    const double keep = 1.0 - channel.rho(e, kUnk) - channel.del(e);
    if (keep > 0.0) opts.push_back({Proposal::kKeep, e, std::log(keep) + no_ins});
    for (const auto& src : channel.sources_of(e)) {
      if (src.prob > 0.0) {
        opts.push_back(
            {Proposal::kSubstitute, src.word, std::log(src.prob) + no_ins});
      }
    }
    if (ins > 0.0 && channel.insertion_weight(e) > 0.0) {
      opts.push_back(
          {Proposal::kDrop, e, std::log(ins * channel.insertion_weight(e))});
    }
    if (opts.empty()) opts.push_back({Proposal::kKeep, e, -1e9});
    std::stable_sort(opts.begin(), opts.end(), [](const auto& a, const auto& b) {
      return a.score > b.score;
    });
    slots.push_back(std::move(opts));
    slots.push_back(gap());
  }
  return slots;
}

// Best-first enumeration of slot combinations; each combination is produced
// exactly once by only advancing slots at or after the last advanced one.
std::vector<std::vector<int>> k_best_combinations(
    const std::vector<std::vector<Proposal>>& slots, std::size_t k) {
  struct Node {
    double score;
    std::vector<int> picks;
    std::size_t last;
    std::uint64_t order;
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.order > b.order;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> frontier(worse);
  std::uint64_t order = 0;
  double start = 0.0;
  for (const auto& s : slots) start += s.front().score;
  frontier.push({start, std::vector<int>(slots.size(), 0), 0, order++});

  std::vector<std::vector<int>> out;
  while (!frontier.empty() && out.size() < k) {
    Node node = frontier.top();
    frontier.pop();
    for (std::size_t p = node.last; p < slots.size(); ++p) {
      const auto next = static_cast<std::size_t>(node.picks[p]) + 1;
      if (next >= slots[p].size()) continue;
      Node child{node.score - slots[p][next - 1].score + slots[p][next].score,
                 node.picks, p, order++};
      child.picks[p] = static_cast<int>(next);
      frontier.push(std::move(child));
    }
    out.push_back(std::move(node.picks));
  }
  return out;
}

}  // namespace

NBestList decode_observation(const WordSequence& observation,
                             const ChannelModel& channel, int n) {
  if (n < 1) throw Error("decode_nbest: n must be >= 1");
  const auto slots = build_slots(observation, channel);
  const auto combos =
      k_best_combinations(slots, static_cast<std::size_t>(4 * n + 4));

  NBestList list;
  list.evidence = observation;
  std::set<std::vector<TokenId>> seen;
  for (const auto& picks : combos) {
    WordSequence hyp;
    hyp.tag = observation.tag;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Proposal& p = slots[s][picks[s]];
      if (p.kind == Proposal::kKeep || p.kind == Proposal::kSubstitute ||
          p.kind == Proposal::kRestore) {
        hyp.words.push_back(p.word);
      }
    }
    if (!seen.insert(hyp.words).second) continue;
    const double score = channel.log_prob(observation.words, hyp.words);
    if (!std::isfinite(score)) continue;
    list.entries.push_back({std::move(hyp), score});
  }
  std::stable_sort(
      list.entries.begin(), list.entries.end(),
      [](const auto& a, const auto& b) { return a.asr_score > b.asr_score; });
  if (list.entries.size() > static_cast<std::size_t>(n)) {
    list.entries.resize(static_cast<std::size_t>(n));
  }
  list.truncated = list.entries.size() < static_cast<std::size_t>(n);
  return list;
}

NBestList decode_nbest(const WordSequence& reference,
                       const ChannelModel& channel, int n, Rng& rng) {
  if (n < 1) throw Error("decode_nbest: n must be >= 1");
  return decode_observation(corrupt(reference, channel, rng), channel, n);
}

std::vector<double> unigram_log_prior(const std::vector<WordSequence>& corpus,
                                      std::size_t vocab_size) {
  std::vector<double> counts(vocab_size, 1.0);
  double total = static_cast<double>(vocab_size);
  for (const auto& seq : corpus) {
    for (TokenId w : seq.words) {
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) {
        throw Error("unigram_log_prior: word id out of range");
      }
      counts[static_cast<std::size_t>(w)] += 1.0;
      total += 1.0;
    }
  }
  for (double& c : counts) c = std::log(c / total);
  return counts;
}

void add_first_pass_prior(NBestList& list, std::span<const double> log_prior,
                          double weight) {
  if (!std::isfinite(weight) || weight < 0.0) {
    throw Error("add_first_pass_prior: weight must be finite and >= 0");
  }
  for (auto& e : list.entries) {
    double lm = 0.0;
    for (TokenId w : e.hypothesis.words) {
      if (w < 0 || static_cast<std::size_t>(w) >= log_prior.size()) {
        throw Error("add_first_pass_prior: word id out of range");
      }
      lm += log_prior[static_cast<std::size_t>(w)];
    }
    e.asr_score += weight * lm;
  }
  std::stable_sort(
      list.entries.begin(), list.entries.end(),
      [](const auto& a, const auto& b) { return a.asr_score > b.asr_score; });
}

void write_nbest_jsonl(const std::vector<NBestList>& lists,
                       const Vocabulary& vocab,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    nlohmann::json hyps = nlohmann::json::array();
    for (const auto& e : lists[i].entries) {
      hyps.push_back({{"text", to_text(e.hypothesis, vocab)},
                      {"score", e.asr_score}});
    }
    out << nlohmann::json{{"ref_id", i}, {"hyps", hyps}}.dump() << '\n';
  }
}

std::vector<NBestList> read_nbest_jsonl(const std::filesystem::path& path,
                                        const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<NBestList> lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      NBestList list;
      for (const auto& h : obj.at("hyps")) {
        list.entries.push_back(
            {encode(split_words(h.at("text").get<std::string>()), vocab),
             h.at("score").get<double>()});
      }
      lists.push_back(std::move(list));
    } catch (const nlohmann::json::exception& e) {
      throw Error("n-best file " + path.string() + " line " +
                  std::to_string(line_no) + ": " + e.what());
    }
  }
  return lists;
}

}  // namespace cflm
