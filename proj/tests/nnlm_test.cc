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


#include <cmath>
#include <cstring>

#include "cflm/nnlm.h"
#include "cflm/numkit/grad_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace cflm {
namespace {

Vocabulary toy_vocab() {
  std::vector<std::string> words;
  for (const char* w : {"the", "cat", "dog", "sat", "ran", "on", "mat", "log",
                        "quickly", "slowly"}) {
    words.push_back(w);
  }
  return Vocabulary::from_tokens(words);
}

// Two-pattern grammar with scores that flag the fourth word.
std::vector<ScoredSequence> toy_corpus(int n, std::uint64_t seed,
                                       double score) {
  Rng rng(seed);
  std::vector<ScoredSequence> out;
  for (int k = 0; k < n; ++k) {
    const bool cat = rng.bernoulli(0.5);
    ScoredSequence s;
    s.words.words = {3, static_cast<TokenId>(cat ? 4 : 5),
                     static_cast<TokenId>(cat ? 6 : 7), 8,
                     static_cast<TokenId>(cat ? 9 : 10)};
    if (rng.bernoulli(0.3)) {
      s.words.words.push_back(static_cast<TokenId>(rng.bernoulli(0.5) ? 11 : 12));
    }
    s.word_scores.assign(s.words.size() + 1, 0.0);
    s.word_scores[3] = score;
    out.push_back(s);
  }
  return out;
}

NnlmConfig small_config(double alpha) {
  NnlmConfig c;
  c.embed_dim = 10;
  c.hidden_dim = 16;
  c.alpha = alpha;
  c.train.epochs = 4;
  c.train.batch_size = 16;
  c.train.learning_rate = 1e-2;
  c.train.seed = 5;
  return c;
}

void perturb(NnlmModel& model, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (nk::Parameter* p : model.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] += rng.uniform(-scale, scale);
    }
  }
}

bool same_parameters(NnlmModel& a, NnlmModel& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k]->value.size() != pb[k]->value.size() ||
        std::memcmp(pa[k]->value.data(), pb[k]->value.data(),
                    sizeof(double) * pa[k]->value.size()) != 0) {
      return false;
    }
  }
  return true;
}

TEST(TokenWeightTest, Examples) {
  EXPECT_DOUBLE_EQ(token_weight(0.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(token_weight(1.0, 3.0), 3.0);
  EXPECT_NEAR(token_weight(0.5, 3.0), std::sqrt(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(token_weight(0.7, 1.0), 1.0);
  EXPECT_THROW(token_weight(1.5, 3.0), Error);
  EXPECT_THROW(token_weight(-0.1, 3.0), Error);
  EXPECT_THROW(token_weight(0.5, 0.5), Error);
}

TEST(TokenWeightTest, TargetWeights) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  ScoredSequence s;
  s.words.words = {3, 4};
  s.word_scores = {0.0, 1.0, 0.5};
  const auto w = model.target_weights(s);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 3.0);
  EXPECT_NEAR(w[2], std::sqrt(3.0), 1e-15);

  NnlmConfig no_eos = small_config(3.0);
  no_eos.use_eos_weight = false;
  EXPECT_DOUBLE_EQ(NnlmModel(vocab, no_eos).target_weights(s)[2], 1.0);
  NnlmConfig conventional = small_config(3.0);
  conventional.objective = Objective::kConventional;
  for (double v : NnlmModel(vocab, conventional).target_weights(s)) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(NnlmTest, ZeroModelIsUniform) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  for (nk::Parameter* p : model.parameters()) p->value.setZero();
  std::vector<WordSequence> corpus;
  for (const auto& s : toy_corpus(20, 1, 0.0)) corpus.push_back(s.words);
  EXPECT_NEAR(perplexity(model, corpus),
              static_cast<double>(model.token_vocab_size()), 1e-9);
}

TEST(NnlmTest, BatchedScoringMatchesSingleSequence) {
  Vocabulary vocab = toy_vocab();
  for (Granularity g : {Granularity::kWord, Granularity::kSubword}) {
    NnlmConfig config = small_config(1.0);
    config.granularity = g;
    NnlmModel model(vocab, config);
    perturb(model, 41, 0.3);
    std::vector<WordSequence> texts = {WordSequence{}};
    for (const auto& s : toy_corpus(300, 2, 0.0)) texts.push_back(s.words);
    texts[7].words.resize(1);
    const std::vector<double> batched = model.log_probs(texts);
    ASSERT_EQ(batched.size(), texts.size());
    for (std::size_t k = 0; k < texts.size(); ++k) {
      EXPECT_NEAR(batched[k], model.log_prob(texts[k]), 1e-12) << k;
    }
  }
}

TEST(NnlmTest, NextTokenDistributionsAreNormalizedAndCausal) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  perturb(model, 2, 0.5);
  std::vector<TokenId> prefix = {3, 4, 6};
  for (std::size_t len = 0; len <= prefix.size(); ++len) {
    const auto lp = model.next_log_probs(std::span<const TokenId>(prefix.data(), len));
    EXPECT_NEAR(lp.array().exp().sum(), 1.0, 1e-9);
  }
  // Changing later tokens cannot change earlier probabilities.
  const std::vector<TokenId> a = {3, 4, 6, 8};
  const std::vector<TokenId> b = {3, 4, 7, 12};
  const auto la = model.token_log_probs(a);
  const auto lb = model.token_log_probs(b);
  EXPECT_EQ(la[0], lb[0]);
  EXPECT_EQ(la[1], lb[1]);
  // Sequence scores agree with chained continuations.
  double chained = 0.0;
  for (std::size_t j = 0; j <= a.size(); ++j) {
    const TokenId next = j < a.size() ? a[j] : kEos;
    EXPECT_NEAR(la[j], model.score_continuation(
                           std::span<const TokenId>(a.data(), j), next),
                1e-12);
    chained += la[j];
  }
  WordSequence text;
  text.words = a;
  EXPECT_NEAR(model.log_prob(text), chained, 1e-12);
}

TEST(NnlmTest, PerplexityMatchesNextTokenRecomputation) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  perturb(model, 3, 0.4);
  std::vector<WordSequence> corpus;
  for (const auto& s : toy_corpus(15, 4, 0.0)) corpus.push_back(s.words);
  double nll = 0.0;
  long count = 0;
  for (const auto& seq : corpus) {
    for (std::size_t j = 0; j <= seq.size(); ++j) {
      const auto lp = model.next_log_probs(
          std::span<const TokenId>(seq.words.data(), j));
      nll -= lp(j < seq.size() ? seq.words[j] : kEos);
      ++count;
    }
  }
  EXPECT_NEAR(perplexity(model, corpus), std::exp(nll / count), 1e-9);
}

TEST(NnlmTest, WeightedLossDecomposes) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  perturb(model, 5, 0.4);
  const std::vector<TokenId> x = {3, 4, 6};
  const std::vector<TokenId> y = {3, 5, 7};
  const std::vector<std::vector<double>> w = {{0.1, 0.7, 0.2, 0.4},
                                              {0.3, 0.05, 0.9, 0.6}};
  nk::Tape tape;
  const double taped =
      tape.value(model.batch_loss(tape, {&x, &y}, w))(0, 0);
  double expected = 0.0;
  const auto lx = model.token_log_probs(x);
  const auto ly = model.token_log_probs(y);
  for (std::size_t j = 0; j < 4; ++j) {
    expected -= w[0][j] * lx[j] + w[1][j] * ly[j];
  }
  EXPECT_NEAR(taped, expected, 1e-12);
}

TEST(NnlmTest, GradientScalesWithTargetWeight) {
  Vocabulary vocab = toy_vocab();
  NnlmModel model(vocab, small_config(3.0));
  perturb(model, 6, 0.4);
  const std::vector<TokenId> x = {3, 4, 6};
  auto grads = [&](double w_mid) {
    std::vector<std::vector<double>> w = {{0.0, w_mid, 0.0, 0.0}};
    nk::Tape tape;
    tape.backward(model.batch_loss(tape, {&x}, w));
    std::vector<nk::Matrix> out;
    for (nk::Parameter* p : model.parameters()) out.push_back(p->grad);
    for (nk::Parameter* p : model.parameters()) p->grad.setZero();
    return out;
  };
  const auto g1 = grads(1.0);
  const auto g3 = grads(3.0);
  for (std::size_t k = 0; k < g1.size(); ++k) {
    EXPECT_LE((g3[k] - 3.0 * g1[k]).cwiseAbs().maxCoeff(),
              1e-12 * (1.0 + g1[k].cwiseAbs().maxCoeff()));
  }
}

TEST(NnlmTest, GradientCheck) {
  Vocabulary vocab = toy_vocab();
  NnlmConfig config = small_config(3.0);
  config.embed_dim = 8;
  config.hidden_dim = 14;
  NnlmModel model(vocab, config);
  perturb(model, 7, 0.3);
  std::size_t count = 0;
  for (nk::Parameter* p : model.parameters()) count += p->value.size();
  ASSERT_GE(count, 1000u);
  const std::vector<TokenId> x = {3, 4, 6};
  const std::vector<TokenId> y = {3, 5, 12};
  const std::vector<std::vector<double>> w = {{0.25, 0.75, 0.25, 0.25},
                                              {0.25, 0.25, 0.25, 0.5}};
  const auto report = nk::grad_check(
      [&](nk::Tape& t) { return model.batch_loss(t, {&x, &y}, w); },
      model.parameters(), 1e-4);
  EXPECT_TRUE(report.passed) << report.worst_block << " " << report.max_rel_error;
}

TEST(NnlmTrainingTest, AlphaOneEqualsConventional) {
  Vocabulary vocab = toy_vocab();
  const auto corpus = toy_corpus(120, 8, 0.8);
  NnlmConfig one = small_config(1.0);
  one.train.epochs = 2;
  NnlmConfig conventional = one;
  conventional.alpha = 3.0;
  conventional.objective = Objective::kConventional;
  NnlmModel a = train_nnlm({{corpus, 1.0}}, vocab, one);
  NnlmModel b = train_nnlm({{corpus, 1.0}}, vocab, conventional);
  EXPECT_TRUE(same_parameters(a, b));
}

TEST(NnlmTrainingTest, ZeroScoresMakeAlphaIrrelevant) {
  Vocabulary vocab = toy_vocab();
  const auto corpus = toy_corpus(120, 9, 0.0);
  NnlmConfig three = small_config(3.0);
  three.train.epochs = 2;
  NnlmConfig one = three;
  one.alpha = 1.0;
  NnlmModel a = train_nnlm({{corpus, 1.0}}, vocab, three);
  NnlmModel b = train_nnlm({{corpus, 1.0}}, vocab, one);
  EXPECT_TRUE(same_parameters(a, b));
}

TEST(NnlmTrainingTest, LearnsAndIsReproducible) {
  Vocabulary vocab = toy_vocab();
  const auto corpus = toy_corpus(400, 10, 0.9);
  NnlmReport report;
  NnlmModel a = train_nnlm({{corpus, 1.0}}, vocab, small_config(3.0), &report);
  NnlmModel b = train_nnlm({{corpus, 1.0}}, vocab, small_config(3.0));
  EXPECT_TRUE(same_parameters(a, b));

  const auto log = report.log_records();
  ASSERT_EQ(log.size(), 4u);
  for (std::size_t e = 0; e < log.size(); ++e) {
    EXPECT_EQ(log[e]["epoch"].get<int>(), static_cast<int>(e) + 1);
    EXPECT_TRUE(log[e].contains("train_weighted_loss"));
    EXPECT_TRUE(log[e].contains("heldout_ppl"));
  }
  EXPECT_LT(log.back()["heldout_ppl"].get<double>(),
            log.front()["heldout_ppl"].get<double>());

  std::vector<WordSequence> train_text, test_text;
  for (const auto& s : corpus) train_text.push_back(s.words);
  for (const auto& s : toy_corpus(100, 11, 0.0)) test_text.push_back(s.words);
  EXPECT_LT(perplexity(a, train_text), 4.0);
  EXPECT_LE(perplexity(a, train_text), perplexity(a, test_text) * 1.05);
}

TEST(NnlmTrainingTest, SaveLoadRoundTrip) {
  Vocabulary vocab = toy_vocab();
  NnlmConfig config = small_config(3.0);
  config.granularity = Granularity::kSubword;
  config.train.epochs = 1;
  NnlmModel model = train_nnlm({{toy_corpus(60, 12, 0.5), 1.0}}, vocab, config);
  ::cflm::testing::TempDir dir;
  model.save(dir / "lm");
  NnlmModel back = NnlmModel::load(dir / "lm");
  EXPECT_TRUE(same_parameters(model, back));
  EXPECT_EQ(back.config().granularity, Granularity::kSubword);
  WordSequence text;
  text.words = {3, 4, 6, 8};
  EXPECT_EQ(model.log_prob(text), back.log_prob(text));
}

TEST(NnlmTrainingTest, SubwordModeSpreadsWordScores) {
  Vocabulary vocab = toy_vocab();
  NnlmConfig config = small_config(3.0);
  config.granularity = Granularity::kSubword;
  NnlmModel model(vocab, config);
  ScoredSequence s;
  s.words.words = {3, 11};  // "the quickly"
  s.word_scores = {0.0, 1.0, 0.0};
  const auto tokens = model.tokenize(s.words);
  ASSERT_EQ(tokens.tokens.size(), 4u);  // the | qui ckl y
  const auto w = model.target_weights(s);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  for (int k = 1; k <= 3; ++k) EXPECT_DOUBLE_EQ(w[k], 3.0);
  EXPECT_DOUBLE_EQ(w[4], 1.0);
  EXPECT_GT(model.token_vocab_size(), vocab.size());
}

TEST(NnlmTrainingTest, MixWeightSelectsSource) {
  Vocabulary vocab = toy_vocab();
  // Source B only ever says "the cat sat quickly slowly".
  std::vector<ScoredSequence> only_b;
  for (int k = 0; k < 200; ++k) {
    ScoredSequence s;
    s.words.words = {3, 4, 6, 11, 12};
    s.word_scores.assign(6, 0.0);
    only_b.push_back(s);
  }
  const auto a = toy_corpus(200, 13, 0.0);
  NnlmConfig config = small_config(1.0);
  config.train.epochs = 3;
  NnlmModel favour_a = train_nnlm({{a, 1.0}, {only_b, 0.05}}, vocab, config);
  NnlmModel favour_b = train_nnlm({{a, 0.05}, {only_b, 1.0}}, vocab, config);
  WordSequence text;
  text.words = {3, 4, 6, 11, 12};
  EXPECT_GT(favour_b.log_prob(text), favour_a.log_prob(text));
  EXPECT_THROW(train_nnlm({{a, -1.0}}, vocab, config), Error);
}

}  // namespace
}  // namespace cflm
