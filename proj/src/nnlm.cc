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


#include "cflm/nnlm.h"

#include <cmath>
#include <fstream>

#include "cflm/numkit/checkpoint.h"
#include "cflm/predictor.h"

namespace cflm {

double token_weight(double score, double alpha) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error("token_weight: score " + std::to_string(score) +
                " outside [0, 1]");
  }
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) {
    throw Error("token_weight: alpha " + std::to_string(alpha) + " below 1");
  }
  return std::pow(alpha, score);
}

std::string_view to_string(Objective objective) {
  return objective == Objective::kConventional ? "conventional"
                                               : "correction-focused";
}

Objective parse_objective(std::string_view text) {
  if (text == "conventional") return Objective::kConventional;
  if (text == "correction-focused") return Objective::kCorrectionFocused;
  throw Error("unknown objective '" + std::string(text) + "'");
}

std::string_view to_string(Granularity granularity) {
  return granularity == Granularity::kSubword ? "subword" : "word";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "word") return Granularity::kWord;
  if (text == "subword") return Granularity::kSubword;
  throw Error("unknown granularity '" + std::string(text) + "'");
}

nlohmann::json NnlmConfig::to_json() const {
  return {{"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim},
          {"layers", layers},
          {"granularity", std::string(to_string(granularity))},
          {"chunk_len", chunk_len},
          {"alpha", alpha},
          {"use_eos_weight", use_eos_weight},
          {"renormalize_weights", renormalize_weights},
          {"objective", std::string(to_string(objective))},
          {"train", train.to_json()}};
}

NnlmConfig NnlmConfig::from_json(const nlohmann::json& j) {
  NnlmConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.layers = j.value("layers", c.layers);
  c.granularity = parse_granularity(
      j.value("granularity", std::string(to_string(c.granularity))));
  c.chunk_len = j.value("chunk_len", c.chunk_len);
  c.alpha = j.value("alpha", c.alpha);
  c.use_eos_weight = j.value("use_eos_weight", c.use_eos_weight);
  c.renormalize_weights = j.value("renormalize_weights", c.renormalize_weights);
  c.objective = parse_objective(
      j.value("objective", std::string(to_string(c.objective))));
  if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
  return c;
}

NnlmModel::NnlmModel(const Vocabulary& words, const NnlmConfig& config)
    : config_(config), words_(words) {
  if (!(config.alpha >= 1.0)) throw Error("nnlm: alpha must be >= 1");
  if (config.granularity == Granularity::kSubword) {
    subwords_.emplace(words, config.chunk_len);
  }
  Rng rng(derive_seed(config.train.seed, "nnlm-init"));
  const int v = static_cast<int>(token_vocab_size());
  trunk_ = RnnTrunk("trunk", {v, config.embed_dim, config.hidden_dim,
                              config.layers},
                    rng);
  head_ = Linear("head", config.hidden_dim, v, &rng);
}

std::size_t NnlmModel::token_vocab_size() const {
  return subwords_ ? subwords_->subwords().size() : words_.size();
}

TokenizedSequence NnlmModel::tokenize(const WordSequence& text) const {
  if (subwords_) return subwords_->tokenize(text);
  for (TokenId w : text.words) {
    if (w < 0 || static_cast<std::size_t>(w) >= words_.size()) {
      throw Error("nnlm: word id " + std::to_string(w) + " out of range");
    }
  }
  return word_level(text);
}

std::vector<double> NnlmModel::target_weights(const ScoredSequence& seq) const {
  check_scored(seq);
  const TokenizedSequence tok = tokenize(seq.words);
  if (config_.objective == Objective::kConventional) {
    return std::vector<double>(tok.tokens.size() + 1, 1.0);
  }
  std::vector<double> weights =
      split_to_nnlm_tokens(seq.word_scores, tok);
  for (double& w : weights) w = token_weight(w, config_.alpha);
  if (!config_.use_eos_weight) weights.back() = 1.0;
  return weights;
}

nk::Var NnlmModel::batch_loss(
    nk::Tape& tape, const std::vector<const std::vector<TokenId>*>& tokens,
    const std::vector<std::vector<double>>& weights) {
  std::vector<std::vector<TokenId>> inputs;
  for (const auto* seq : tokens) {
    std::vector<TokenId> in;
    in.reserve(seq->size() + 1);
    in.push_back(kBos);
    in.insert(in.end(), seq->begin(), seq->end());
    inputs.push_back(std::move(in));
  }
  const std::size_t length = inputs.front().size();
  const std::vector<nk::Var> states = trunk_.forward(tape, inputs);
  std::vector<TokenId> targets(inputs.size());
  std::vector<double> w(inputs.size());
  nk::Var total;
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t r = 0; r < inputs.size(); ++r) {
      targets[r] = t + 1 < length ? inputs[r][t + 1] : kEos;
      w[r] = weights[r].at(t);
    }
    nk::Var nll = nk::weighted_nll(head_.apply(tape, states[t]), targets, w);
    total = t == 0 ? nll : nk::add(total, nll);
  }
  return total;
}

std::vector<double> NnlmModel::token_log_probs(
    std::span<const TokenId> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size() + 1);
  RnnTrunk::State state = trunk_.initial_state();
  TokenId current = kBos;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    const nk::RowVector logits = head_.apply(trunk_.step(state, current));
    const TokenId target = t < tokens.size() ? tokens[t] : kEos;
    out.push_back(logits(target) - nk::log_sum_exp(logits));
    current = target;
  }
  return out;
}

double NnlmModel::log_prob(const WordSequence& text) const {
  double total = 0.0;
  for (double lp : token_log_probs(tokenize(text).tokens)) total += lp;
  return total;
}

std::vector<double> NnlmModel::log_probs(
    const std::vector<WordSequence>& texts) const {
  std::vector<std::vector<TokenId>> tokens;
  tokens.reserve(texts.size());
  for (const WordSequence& t : texts) tokens.push_back(tokenize(t).tokens);
  return token_sequence_log_probs(tokens);
}

std::vector<double> NnlmModel::token_sequence_log_probs(
    const std::vector<std::vector<TokenId>>& tokens) const {
  constexpr std::size_t kRows = 256;
  std::vector<double> out(tokens.size(), 0.0);
  for (std::size_t begin = 0; begin < tokens.size(); begin += kRows) {
    const std::size_t end = std::min(tokens.size(), begin + kRows);
    std::size_t longest = 0;
    for (std::size_t k = begin; k < end; ++k) {
      longest = std::max(longest, tokens[k].size());
    }
    RnnTrunk::BatchState state = trunk_.initial_batch_state(end - begin);
    std::vector<TokenId> current(end - begin, kBos);
    for (std::size_t t = 0; t <= longest; ++t) {
      const nk::Matrix logits = head_.apply_rows(trunk_.step_batch(state, current));
      for (std::size_t b = 0; b < current.size(); ++b) {
        const auto& seq = tokens[begin + b];
        if (t > seq.size()) {
          current[b] = kEos;
          continue;
        }
        const TokenId target = t < seq.size() ? seq[t] : kEos;
        const auto row = static_cast<Eigen::Index>(b);
        out[begin + b] += logits(row, target) - nk::log_sum_exp(logits.row(row));
        current[b] = target;
      }
    }
  }
  return out;
}

std::size_t NnlmModel::target_count(const WordSequence& text) const {
  return tokenize(text).tokens.size() + 1;
}

nk::RowVector NnlmModel::next_log_probs(std::span<const TokenId> prefix) const {
  RnnTrunk::State state = trunk_.initial_state();
  nk::RowVector h = trunk_.step(state, kBos);
  for (TokenId t : prefix) h = trunk_.step(state, t);
  return nk::log_softmax_rows(head_.apply(h));
}

double NnlmModel::score_continuation(std::span<const TokenId> prefix,
                                     TokenId next) const {
  if (next < 0 || static_cast<std::size_t>(next) >= token_vocab_size()) {
    throw Error("score_continuation: token id out of range");
  }
  return next_log_probs(prefix)(next);
}

nk::ParameterRefs NnlmModel::parameters() {
  nk::ParameterRefs out;
  trunk_.collect(out);
  head_.collect(out);
  return out;
}

void NnlmModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "config.json") << config_.to_json().dump(2) << '\n';
  words_.save(dir / "vocab.txt");
  auto params = const_cast<NnlmModel*>(this)->parameters();
  nk::save_checkpoint(dir / "weights.ckpt",
                      std::vector<const nk::Parameter*>(params.begin(),
                                                        params.end()));
}

NnlmModel NnlmModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw Error("cannot read " + (dir / "config.json").string());
  NnlmModel model(Vocabulary::load(dir / "vocab.txt"),
                  NnlmConfig::from_json(nlohmann::json::parse(in)));
  nk::load_checkpoint(dir / "weights.ckpt", model.parameters());
  return model;
}

std::vector<nlohmann::json> NnlmReport::log_records() const {
  std::vector<nlohmann::json> out;
  for (const EpochRecord& r : training.epochs) {
    out.push_back({{"epoch", r.epoch},
                   {"train_weighted_loss", r.train_loss},
                   {"heldout_ppl", r.heldout}});
  }
  return out;
}

namespace {

struct Example {
  std::vector<TokenId> tokens;
  std::vector<double> weights;  // before 1/|z| and batch scaling
};

}  // namespace

NnlmModel train_nnlm(const std::vector<ScoredSource>& sources,
                     const Vocabulary& words, const NnlmConfig& config,
                     NnlmReport* report) {
  if (!(config.alpha >= 1.0)) throw Error("train_nnlm: alpha must be >= 1");
  if (sources.empty()) throw Error("train_nnlm: no corpora");
  NnlmModel model(words, config);

  std::vector<Example> examples;
  std::vector<int> lengths;
  std::vector<std::vector<std::size_t>> train_items(sources.size());
  std::vector<std::size_t> heldout;
  std::vector<double> mix;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!(sources[s].mix_weight > 0.0)) {
      throw Error("train_nnlm: mix weights must be positive");
    }
    if (sources[s].corpus.empty()) {
      throw Error("train_nnlm: corpus " + std::to_string(s) + " is empty");
    }
    mix.push_back(sources[s].mix_weight);
    const std::size_t offset = examples.size();
    for (std::size_t k = 0; k < sources[s].corpus.size(); ++k) {
      const ScoredSequence& seq = sources[s].corpus[k];
      try {
        examples.push_back({model.tokenize(seq.words).tokens,
                            model.target_weights(seq)});
      } catch (const Error& e) {
        throw Error("corpus " + std::to_string(s) + " sequence " +
                    std::to_string(k) + ": " + e.what());
      }
      lengths.push_back(static_cast<int>(examples.back().tokens.size()));
    }
    const std::uint64_t split_seed =
        s == 0 ? config.train.seed : derive_seed(config.train.seed, s);
    const Split split = split_heldout(sources[s].corpus.size(), split_seed,
                                      config.train.heldout_fraction);
    for (std::size_t i : split.train) train_items[s].push_back(offset + i);
    for (std::size_t i : split.heldout) heldout.push_back(offset + i);
  }
  if (heldout.empty()) {
    for (const auto& items : train_items) {
      heldout.insert(heldout.end(), items.begin(), items.end());
    }
  }

  TrainHooks hooks;
  hooks.plan_epoch = [&](int, Rng& rng) {
    std::vector<std::vector<std::vector<std::size_t>>> queues;
    std::vector<std::size_t> next(sources.size(), 0);
    std::size_t total = 0;
    for (const auto& items : train_items) {
      queues.push_back(
          length_batches(items, lengths, config.train.batch_size, rng));
      total += queues.back().size();
    }
    if (sources.size() == 1) return queues.front();
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t b = 0; b < total; ++b) {
      const std::size_t s = rng.categorical(mix);
      if (queues[s].empty()) continue;
      if (next[s] == queues[s].size()) {
        queues[s] =
            length_batches(train_items[s], lengths, config.train.batch_size, rng);
        next[s] = 0;
      }
      plan.push_back(queues[s][next[s]++]);
    }
    return plan;
  };
  hooks.batch_loss = [&](nk::Tape& tape, std::span<const std::size_t> batch) {
    std::vector<const std::vector<TokenId>*> tokens;
    std::vector<std::vector<double>> weights;
    double weight_sum = 0.0;
    std::size_t weight_count = 0;
    for (std::size_t i : batch) {
      tokens.push_back(&examples[i].tokens);
      const double scale =
          1.0 / static_cast<double>(examples[i].weights.size() * batch.size());
      std::vector<double> w = examples[i].weights;
      for (double& x : w) {
        weight_sum += x;
        ++weight_count;
        x *= scale;
      }
      weights.push_back(std::move(w));
    }
    if (config.renormalize_weights && weight_sum > 0.0) {
      const double factor = static_cast<double>(weight_count) / weight_sum;
      for (auto& w : weights) {
        for (double& x : w) x *= factor;
      }
    }
    return model.batch_loss(tape, tokens, weights);
  };
  hooks.heldout_metric = [&] {
    std::vector<std::vector<TokenId>> tokens;
    long count = 0;
    for (std::size_t i : heldout) {
      tokens.push_back(examples[i].tokens);
      count += static_cast<long>(examples[i].tokens.size()) + 1;
    }
    double nll = 0.0;
    for (double lp : model.token_sequence_log_probs(tokens)) nll -= lp;
    return std::exp(nll / static_cast<double>(count));
  };
  TrainResult result = run_training(model.parameters(), config.train, hooks);
  if (report != nullptr) report->training = std::move(result);
  return model;
}

double perplexity(const NnlmModel& model,
                  const std::vector<WordSequence>& corpus) {
  if (corpus.empty()) throw Error("perplexity: empty corpus");
  double nll = 0.0;
  long count = 0;
  const auto lps = model.log_probs(corpus);
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    nll -= lps[k];
    count += static_cast<long>(model.target_count(corpus[k]));
  }
  return std::exp(nll / static_cast<double>(count));
}

}  // namespace cflm
