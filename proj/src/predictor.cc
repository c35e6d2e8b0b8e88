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


#include "cflm/predictor.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cflm/numkit/checkpoint.h"

namespace cflm {
namespace {

constexpr double kScoreFloor = 1e-12;

double error_probability(const nk::RowVector& logits) {
  const double p = 1.0 / (1.0 + std::exp(logits(0) - logits(1)));
  return std::clamp(p, kScoreFloor, 1.0 - kScoreFloor);
}

nk::Var sum(nk::Var acc, nk::Var term, bool first) {
  return first ? term : nk::add(acc, term);
}

}  // namespace

std::string_view to_string(ContextMode mode) {
  return mode == ContextMode::kCausal ? "causal" : "bidirectional";
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "causal") return ContextMode::kCausal;
  if (text == "bidirectional") return ContextMode::kBidirectional;
  throw Error("unknown context mode '" + std::string(text) + "'");
}

nlohmann::json PredictorConfig::to_json() const {
  return {{"chunk_len", chunk_len}, {"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim}, {"layers", layers},
          {"mode", std::string(to_string(mode))}, {"train", train.to_json()}};
}

PredictorConfig PredictorConfig::from_json(const nlohmann::json& j) {
  PredictorConfig c;
  c.chunk_len = j.value("chunk_len", c.chunk_len);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.layers = j.value("layers", c.layers);
  c.mode = parse_context_mode(
      j.value("mode", std::string(to_string(c.mode))));
  if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
  return c;
}

PredictorModel::PredictorModel(const Vocabulary& words,
                               const PredictorConfig& config)
    : config_(config), tokenizer_(words, config.chunk_len) {
  Rng rng(derive_seed(config.train.seed, "predictor-init"));
  const RnnShape shape{static_cast<int>(tokenizer_.subwords().size()),
                       config.embed_dim, config.hidden_dim, config.layers};
  forward_ = RnnTrunk("forward", shape, rng);
  int features = config.hidden_dim;
  if (config.mode == ContextMode::kBidirectional) {
    backward_ = RnnTrunk("backward", shape, rng);
    features *= 2;
  }
  head_ = Linear("head", features, 2, nullptr);
}

std::vector<TokenId> PredictorModel::input_tokens(
    const WordSequence& text) const {
  std::vector<TokenId> tokens = tokenizer_.tokenize(text).tokens;
  tokens.push_back(kEos);
  return tokens;
}

std::vector<double> PredictorModel::predict(
    std::span<const TokenId> inputs) const {
  const nk::Matrix fwd = forward_.run(inputs);
  nk::Matrix features = fwd;
  if (config_.mode == ContextMode::kBidirectional) {
    features = nk::hconcat(fwd, backward_.run(inputs, true));
  }
  std::vector<double> scores(inputs.size());
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    scores[t] = error_probability(head_.apply(nk::RowVector(features.row(t))));
  }
  return scores;
}

nk::Var PredictorModel::batch_loss(
    nk::Tape& tape, const std::vector<std::vector<TokenId>>& inputs,
    const std::vector<std::vector<Label>>& labels) {
  const std::vector<nk::Var> fwd = forward_.forward(tape, inputs);
  std::vector<nk::Var> bwd;
  if (config_.mode == ContextMode::kBidirectional) {
    bwd = backward_.forward(tape, inputs, true);
  }
  const std::size_t length = inputs.front().size();
  const std::vector<double> weights(
      inputs.size(), 1.0 / static_cast<double>(length * inputs.size()));
  std::vector<TokenId> targets(inputs.size());
  nk::Var total;
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t r = 0; r < inputs.size(); ++r) {
      targets[r] = labels[r].at(t);
    }
    nk::Var features = bwd.empty() ? fwd[t] : nk::concat(fwd[t], bwd[t]);
    nk::Var nll = nk::weighted_nll(head_.apply(tape, features), targets, weights);
    total = sum(total, nll, t == 0);
  }
  return total;
}

nk::ParameterRefs PredictorModel::parameters() {
  nk::ParameterRefs out;
  forward_.collect(out);
  if (config_.mode == ContextMode::kBidirectional) backward_.collect(out);
  head_.collect(out);
  return out;
}

void PredictorModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "config.json") << config_.to_json().dump(2) << '\n';
  tokenizer_.words().save(dir / "vocab.txt");
  auto params = const_cast<PredictorModel*>(this)->parameters();
  nk::save_checkpoint(dir / "weights.ckpt",
                      std::vector<const nk::Parameter*>(params.begin(),
                                                        params.end()));
}

PredictorModel PredictorModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw Error("cannot read " + (dir / "config.json").string());
  PredictorModel model(Vocabulary::load(dir / "vocab.txt"),
                       PredictorConfig::from_json(nlohmann::json::parse(in)));
  nk::load_checkpoint(dir / "weights.ckpt", model.parameters());
  return model;
}

namespace {

struct LabelledInputs {
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::vector<Label>> labels;
  std::vector<int> lengths;
};

LabelledInputs prepare(const PredictorModel& model,
                       const std::vector<AnnotatedPair>& pairs) {
  LabelledInputs out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const AnnotatedPair& p = pairs[k];
    if (p.word_labels.size() != p.reference.size() + 1) {
      throw Error("pair " + std::to_string(k) + ": label count mismatch");
    }
    const TokenizedSequence tok = model.tokenizer().tokenize(p.reference);
    out.inputs.push_back(model.input_tokens(p.reference));
    out.labels.push_back(expand_labels(p.word_labels, tok.word_spans));
    out.lengths.push_back(static_cast<int>(out.inputs.back().size()));
  }
  return out;
}

double sequence_loss(const PredictorModel& model,
                     const std::vector<TokenId>& inputs,
                     const std::vector<Label>& labels) {
  const std::vector<double> p = model.predict(inputs);
  double loss = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    loss -= std::log(labels[t] ? p[t] : 1.0 - p[t]);
  }
  return loss / static_cast<double>(p.size());
}

}  // namespace

double predictor_loss(const PredictorModel& model,
                      const std::vector<AnnotatedPair>& pairs) {
  if (pairs.empty()) throw Error("predictor_loss: no pairs");
  const LabelledInputs data = prepare(model, pairs);
  double total = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    total += sequence_loss(model, data.inputs[k], data.labels[k]);
  }
  return total / static_cast<double>(pairs.size());
}

PredictorModel train_predictor(const std::vector<AnnotatedPair>& corpus,
                               const Vocabulary& words,
                               const PredictorConfig& config,
                               PredictorReport* report) {
  if (corpus.empty()) throw Error("train_predictor: empty corpus");
  PredictorModel model(words, config);
  const LabelledInputs data = prepare(model, corpus);

  std::vector<std::string> warnings;
  long ones = 0;
  long total = 0;
  for (const auto& labels : data.labels) {
    ones += std::count(labels.begin(), labels.end(), 1);
    total += static_cast<long>(labels.size());
  }
  if (ones == 0 || ones == total) warnings.push_back("degenerate labels");

  const Split split = split_heldout(corpus.size(), config.train.seed,
                                    config.train.heldout_fraction);
  TrainHooks hooks;
  hooks.plan_epoch = [&](int, Rng& rng) {
    return length_batches(split.train, data.lengths, config.train.batch_size,
                          rng);
  };
  hooks.batch_loss = [&](nk::Tape& tape, std::span<const std::size_t> batch) {
    std::vector<std::vector<TokenId>> inputs;
    std::vector<std::vector<Label>> labels;
    for (std::size_t i : batch) {
      inputs.push_back(data.inputs[i]);
      labels.push_back(data.labels[i]);
    }
    return model.batch_loss(tape, inputs, labels);
  };
  const std::vector<std::size_t>& selection =
      split.heldout.empty() ? split.train : split.heldout;
  hooks.heldout_metric = [&] {
    double loss = 0.0;
    for (std::size_t i : selection) {
      loss += sequence_loss(model, data.inputs[i], data.labels[i]);
    }
    return loss / static_cast<double>(selection.size());
  };
  TrainResult result = run_training(model.parameters(), config.train, hooks);
  if (report != nullptr) {
    report->training = std::move(result);
    report->warnings = std::move(warnings);
  }
  return model;
}

std::vector<double> predict_scores(const PredictorModel& model,
                                   const WordSequence& text) {
  return model.predict(model.input_tokens(text));
}

std::vector<double> assemble_word_scores(std::span<const double> token_scores,
                                         std::span<const Span> spans) {
  const int tokens = spans.empty() ? 0 : spans.back().end;
  if (token_scores.size() != static_cast<std::size_t>(tokens) + 1) {
    throw Error("assemble_word_scores: " + std::to_string(token_scores.size()) +
                " scores for " + std::to_string(tokens) + " tokens plus <eos>");
  }
  std::vector<double> out;
  out.reserve(spans.size() + 1);
  int cursor = 0;
  for (const Span& span : spans) {
    if (span.begin != cursor || span.end <= span.begin) {
      throw Error("assemble_word_scores: spans do not partition the tokens");
    }
    out.push_back(*std::max_element(token_scores.begin() + span.begin,
                                    token_scores.begin() + span.end));
    cursor = span.end;
  }
  out.push_back(token_scores.back());
  return out;
}

std::vector<double> split_to_nnlm_tokens(std::span<const double> word_scores,
                                         const TokenizedSequence& nnlm_tokens) {
  if (word_scores.size() != nnlm_tokens.word_spans.size() + 1) {
    throw Error("split_to_nnlm_tokens: " + std::to_string(word_scores.size()) +
                " scores for " + std::to_string(nnlm_tokens.word_spans.size()) +
                " words plus <eos>");
  }
  std::vector<double> out;
  out.reserve(nnlm_tokens.tokens.size() + 1);
  for (std::size_t k = 0; k < nnlm_tokens.word_spans.size(); ++k) {
    out.insert(out.end(),
               static_cast<std::size_t>(nnlm_tokens.word_spans[k].size()),
               word_scores[k]);
  }
  out.push_back(word_scores.back());
  return out;
}

ScoredSequence score_sequence(const PredictorModel& model,
                              const WordSequence& text) {
  const TokenizedSequence tok = model.tokenizer().tokenize(text);
  std::vector<TokenId> inputs = tok.tokens;
  inputs.push_back(kEos);
  return ScoredSequence{text,
                        assemble_word_scores(model.predict(inputs),
                                             tok.word_spans)};
}

std::vector<ScoredSequence> score_corpus(
    const PredictorModel& model, const std::vector<WordSequence>& corpus) {
  std::vector<ScoredSequence> out;
  out.reserve(corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    try {
      out.push_back(score_sequence(model, corpus[k]));
    } catch (const Error& e) {
      throw Error("sequence " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cflm
