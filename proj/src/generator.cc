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


#include "cflm/generator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "cflm/numkit/checkpoint.h"
#include "cflm/numkit/optim.h"

namespace cflm {

nlohmann::json GeneratorConfig::to_json() const {
  return {{"embed_dim", embed_dim},   {"hidden_dim", hidden_dim},
          {"layers", layers},         {"lambda", lambda},
          {"include_classifier", include_classifier},
          {"train", train.to_json()}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.layers = j.value("layers", c.layers);
  c.lambda = j.value("lambda", c.lambda);
  c.include_classifier = j.value("include_classifier", c.include_classifier);
  if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
  return c;
}

GeneratorModel::GeneratorModel(const Vocabulary& vocab,
                               const GeneratorConfig& config)
    : config_(config), vocab_(vocab) {
  if (config.lambda < 0.0 || !std::isfinite(config.lambda)) {
    throw Error("generator: lambda must be >= 0");
  }
  Rng rng(derive_seed(config.train.seed, "generator-init"));
  const int v = static_cast<int>(vocab.size());
  trunk_ = RnnTrunk("trunk", {v, config.embed_dim, config.hidden_dim,
                              config.layers},
                    rng);
  lm_head_ = Linear("lm_head", config.hidden_dim, v, &rng);
  if (config.include_classifier) {
    cls_head_ = Linear("cls_head", config.hidden_dim, 2, nullptr);
  }
}

namespace {

std::vector<TokenId> with_markers(const WordSequence& words) {
  std::vector<TokenId> out;
  out.reserve(words.size() + 2);
  out.push_back(kBos);
  out.insert(out.end(), words.words.begin(), words.words.end());
  out.push_back(kEos);
  return out;
}

double log_softmax_at(const nk::RowVector& logits, TokenId target) {
  return logits(target) - nk::log_sum_exp(logits);
}

}  // namespace

nk::Var GeneratorModel::batch_loss(
    nk::Tape& tape, const std::vector<const AnnotatedPair*>& batch) {
  std::vector<std::vector<TokenId>> inputs;
  for (const AnnotatedPair* p : batch) inputs.push_back(with_markers(p->reference));
  const std::size_t n = batch.front()->reference.size();
  const std::vector<nk::Var> states = trunk_.forward(tape, inputs);
  const double scale = 1.0 / static_cast<double>((n + 1) * batch.size());

  // LM head at steps 0..n targets the next token.
  const std::vector<double> lm_weights(batch.size(), scale);
  std::vector<TokenId> targets(batch.size());
  nk::Var total;
  for (std::size_t t = 0; t <= n; ++t) {
    for (std::size_t r = 0; r < batch.size(); ++r) targets[r] = inputs[r][t + 1];
    nk::Var nll = nk::weighted_nll(lm_head_.apply(tape, states[t]), targets,
                                   lm_weights);
    total = t == 0 ? nll : nk::add(total, nll);
  }
  if (!config_.include_classifier) return total;

  // Classification head at steps 1..n+1 scores the consumed token.
  const std::vector<double> cls_weights(batch.size(), config_.lambda * scale);
  for (std::size_t t = 1; t <= n + 1; ++t) {
    for (std::size_t r = 0; r < batch.size(); ++r) {
      targets[r] = batch[r]->word_labels.at(t - 1);
    }
    total = nk::add(total, nk::weighted_nll(cls_head_.apply(tape, states[t]),
                                            targets, cls_weights));
  }
  return total;
}

double GeneratorModel::error_probability(const nk::RowVector& state) const {
  if (!config_.include_classifier) {
    throw Error("generator: model has no classification head");
  }
  const nk::RowVector logits = cls_head_.apply(state);
  return std::clamp(1.0 / (1.0 + std::exp(logits(0) - logits(1))), 1e-12,
                    1.0 - 1e-12);
}

GeneratorModel::SequenceLoss GeneratorModel::sequence_loss(
    const AnnotatedPair& pair) const {
  const std::vector<TokenId> inputs = with_markers(pair.reference);
  const nk::Matrix states = trunk_.run(inputs);
  SequenceLoss out;
  out.tokens = static_cast<int>(pair.reference.size()) + 1;
  for (std::size_t t = 0; t + 1 < inputs.size(); ++t) {
    out.lm -= log_softmax_at(lm_head_.apply(nk::RowVector(states.row(t))),
                             inputs[t + 1]);
  }
  if (config_.include_classifier) {
    for (std::size_t t = 1; t < inputs.size(); ++t) {
      const double p = error_probability(states.row(t));
      out.classifier -= std::log(pair.word_labels.at(t - 1) ? p : 1.0 - p);
    }
  }
  return out;
}

nk::ParameterRefs GeneratorModel::parameters() {
  nk::ParameterRefs out;
  trunk_.collect(out);
  lm_head_.collect(out);
  if (config_.include_classifier) cls_head_.collect(out);
  return out;
}

nk::ParameterRefs GeneratorModel::classifier_parameters() {
  nk::ParameterRefs out;
  if (config_.include_classifier) cls_head_.collect(out);
  return out;
}

void GeneratorModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "config.json") << config_.to_json().dump(2) << '\n';
  vocab_.save(dir / "vocab.txt");
  auto params = const_cast<GeneratorModel*>(this)->parameters();
  nk::save_checkpoint(dir / "weights.ckpt",
                      std::vector<const nk::Parameter*>(params.begin(),
                                                        params.end()));
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw Error("cannot read " + (dir / "config.json").string());
  GeneratorModel model(Vocabulary::load(dir / "vocab.txt"),
                       GeneratorConfig::from_json(nlohmann::json::parse(in)));
  nk::load_checkpoint(dir / "weights.ckpt", model.parameters());
  return model;
}

GeneratorModel train_generator(const std::vector<AnnotatedPair>& corpus,
                               const Vocabulary& vocab,
                               const GeneratorConfig& config,
                               GeneratorReport* report) {
  if (corpus.empty()) throw Error("train_generator: empty corpus");
  if (config.lambda < 0.0) throw Error("train_generator: lambda must be >= 0");
  GeneratorModel model(vocab, config);
  std::vector<int> lengths;
  for (const AnnotatedPair& p : corpus) {
    if (p.word_labels.size() != p.reference.size() + 1) {
      throw Error("train_generator: label count mismatch");
    }
    lengths.push_back(static_cast<int>(p.reference.size()));
  }
  const Split split = split_heldout(corpus.size(), config.train.seed,
                                    config.train.heldout_fraction);
  const std::vector<std::size_t>& selection =
      split.heldout.empty() ? split.train : split.heldout;
  double max_cls_norm = 0.0;
  std::vector<double> heldout_ppl;
  nk::ParameterRefs cls = model.classifier_parameters();

  TrainHooks hooks;
  hooks.plan_epoch = [&](int, Rng& rng) {
    return length_batches(split.train, lengths, config.train.batch_size, rng);
  };
  hooks.batch_loss = [&](nk::Tape& tape, std::span<const std::size_t> batch) {
    std::vector<const AnnotatedPair*> pairs;
    for (std::size_t i : batch) pairs.push_back(&corpus[i]);
    return model.batch_loss(tape, pairs);
  };
  hooks.after_backward = [&] {
    if (!cls.empty()) max_cls_norm = std::max(max_cls_norm, nk::grad_norm(cls));
  };
  hooks.heldout_metric = [&] {
    double total = 0.0;
    double lm = 0.0;
    long tokens = 0;
    for (std::size_t i : selection) {
      const auto loss = model.sequence_loss(corpus[i]);
      total += (loss.lm + config.lambda * loss.classifier) / loss.tokens;
      lm += loss.lm;
      tokens += loss.tokens;
    }
    heldout_ppl.push_back(std::exp(lm / static_cast<double>(tokens)));
    return total / static_cast<double>(selection.size());
  };
  TrainResult result = run_training(model.parameters(), config.train, hooks);
  if (report != nullptr) {
    report->training = std::move(result);
    report->max_classifier_grad_norm = max_cls_norm;
    report->heldout_ppl = std::move(heldout_ppl);
  }
  return model;
}

double generator_perplexity(const GeneratorModel& model,
                            const std::vector<WordSequence>& corpus) {
  if (corpus.empty()) throw Error("generator_perplexity: empty corpus");
  double nll = 0.0;
  long tokens = 0;
  for (const WordSequence& seq : corpus) {
    AnnotatedPair pair;
    pair.reference = seq;
    pair.word_labels.assign(seq.size() + 1, 0);
    const auto loss = model.sequence_loss(pair);
    nll += loss.lm;
    tokens += loss.tokens;
  }
  return std::exp(nll / static_cast<double>(tokens));
}

double generator_classifier_loss(const GeneratorModel& model,
                                 const std::vector<AnnotatedPair>& pairs) {
  if (pairs.empty()) throw Error("generator_classifier_loss: no pairs");
  double total = 0.0;
  for (const AnnotatedPair& p : pairs) {
    const auto loss = model.sequence_loss(p);
    total += loss.classifier / loss.tokens;
  }
  return total / static_cast<double>(pairs.size());
}

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kGreedy:
      return "greedy";
    case DecodeMode::kTopK:
      return "top-k";
    case DecodeMode::kSample:
      break;
  }
  return "sample";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "greedy") return DecodeMode::kGreedy;
  if (text == "sample") return DecodeMode::kSample;
  if (text == "top-k") return DecodeMode::kTopK;
  throw Error("unknown decode mode '" + std::string(text) + "'");
}

nlohmann::json GenerationConfig::to_json() const {
  return {{"max_len", max_len},         {"stop_at_eos", stop_at_eos},
          {"mode", std::string(to_string(mode))},
          {"temperature", temperature}, {"top_k", top_k},
          {"seed", seed},               {"count", count}};
}

GenerationConfig GenerationConfig::from_json(const nlohmann::json& j) {
  GenerationConfig c;
  c.max_len = j.value("max_len", c.max_len);
  c.stop_at_eos = j.value("stop_at_eos", c.stop_at_eos);
  c.mode = parse_decode_mode(j.value("mode", std::string(to_string(c.mode))));
  c.temperature = j.value("temperature", c.temperature);
  c.top_k = j.value("top_k", c.top_k);
  c.seed = j.value("seed", c.seed);
  c.count = j.value("count", c.count);
  return c;
}

namespace {

void check_generation_config(const GenerationConfig& c, std::size_t vocab) {
  if (c.max_len < 1) throw Error("generation: max_len must be >= 1");
  if (!(c.temperature > 0.0)) throw Error("generation: temperature must be > 0");
  if (c.mode == DecodeMode::kTopK &&
      (c.top_k < 1 || static_cast<std::size_t>(c.top_k) > vocab)) {
    throw Error("generation: top_k must be in [1, |V|]");
  }
  if (c.count < 0) throw Error("generation: count must be >= 0");
}

TokenId choose(nk::RowVector logits, const GenerationConfig& c, bool allow_eos,
               Rng& rng) {
  logits(kBos) = -INFINITY;
  logits(kUnk) = -INFINITY;
  if (!allow_eos) logits(kEos) = -INFINITY;
  if (c.mode == DecodeMode::kGreedy) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<TokenId>(best);
  }
  if (c.mode == DecodeMode::kTopK) {
    std::vector<int> order(static_cast<std::size_t>(logits.size()));
    std::iota(order.begin(), order.end(), 0);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(c.top_k),
                                         order.size());
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                        if (logits(a) != logits(b)) return logits(a) > logits(b);
                        return a < b;
                      });
    for (std::size_t i = k; i < order.size(); ++i) logits(order[i]) = -INFINITY;
  }
  const nk::RowVector p = nk::softmax_rows(nk::RowVector(logits / c.temperature));
  return static_cast<TokenId>(
      rng.categorical(std::span<const double>(p.data(), p.size())));
}

}  // namespace

GenerationResult generate_scored(const GeneratorModel& model,
                                 const GenerationConfig& config) {
  check_generation_config(config, model.vocab().size());
  GenerationResult result;
  const RnnTrunk& trunk = model.trunk();
  for (int i = 0; i < config.count; ++i) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    RnnTrunk::State state = trunk.initial_state();
    nk::RowVector h = trunk.step(state, kBos);
    long steps = 1;
    ScoredSequence seq;
    seq.words.tag = SourceTag::kGenerated;
    while (static_cast<int>(seq.words.size()) < config.max_len) {
      const TokenId next =
          choose(model.lm_logits(h), config, config.stop_at_eos, rng);
      if (next == kEos) break;
      h = trunk.step(state, next);
      ++steps;
      seq.words.words.push_back(next);
      seq.word_scores.push_back(model.error_probability(h));
    }
    h = trunk.step(state, kEos);
    ++steps;
    seq.word_scores.push_back(model.error_probability(h));
    result.trunk_steps += steps;
    if (seq.words.empty()) {
      ++result.dropped_empty;
      continue;
    }
    result.sequences.push_back(std::move(seq));
  }
  return result;
}

std::vector<ScoredSequence> filter_generated(
    const std::vector<ScoredSequence>& corpus, bool dedup, int min_len,
    int max_len, FilterReport* report) {
  FilterReport r;
  std::set<std::vector<TokenId>> seen;
  std::vector<ScoredSequence> out;
  for (const ScoredSequence& seq : corpus) {
    ++r.input;
    const int n = static_cast<int>(seq.words.size());
    if (n < min_len || n > max_len) {
      ++r.out_of_range;
      continue;
    }
    if (dedup && !seen.insert(seq.words.words).second) {
      ++r.duplicates;
      continue;
    }
    out.push_back(seq);
  }
  r.kept = static_cast<long>(out.size());
  if (report != nullptr) *report = r;
  return out;
}

nlohmann::json generation_report(const GenerationConfig& config,
                                 const GenerationResult& result,
                                 const std::vector<ScoredSequence>& kept,
                                 const FilterReport& filter) {
  double words = 0.0;
  double score = 0.0;
  long scored = 0;
  for (const ScoredSequence& seq : kept) {
    words += static_cast<double>(seq.words.size());
    for (double s : seq.word_scores) score += s;
    scored += static_cast<long>(seq.word_scores.size());
  }
  return {{"requested", config.count},
          {"generated", result.sequences.size()},
          {"dropped_empty", result.dropped_empty},
          {"kept", filter.kept},
          {"duplicates", filter.duplicates},
          {"out_of_range", filter.out_of_range},
          {"mean_length", kept.empty() ? 0.0 : words / kept.size()},
          {"mean_score", scored == 0 ? 0.0 : score / scored},
          {"trunk_steps", result.trunk_steps}};
}

}  // namespace cflm
