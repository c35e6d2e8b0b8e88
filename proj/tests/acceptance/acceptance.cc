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


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cflm/align.h"
#include "cflm/asrsim.h"
#include "cflm/fusion.h"
#include "cflm/generator.h"
#include "cflm/nnlm.h"
#include "cflm/numkit/grad_check.h"
#include "cflm/predictor.h"
#include "cli.h"
#include "json.hpp"
#include "oracles.h"

namespace cflm::acceptance {
namespace {

namespace fs = std::filesystem;

// Tolerances and limits.
constexpr int kOracleMaxLen = 6;
constexpr int kOracleSymbols = 4;
constexpr int kOracleRandomPairs = 1000;
constexpr double kOracleSeconds = 60.0;
constexpr int kFallibilitySequences = 20;
constexpr int kFallibilitySamples = 10000;
constexpr double kFallibilityTolerance = 0.02;
constexpr double kFallibilitySeconds = 120.0;
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kGradMinParams = 1000;
constexpr double kBatchLossTolerance = 1e-12;
constexpr double kAlphaSweepMinGain = 0.02;
constexpr double kAlphaSweepSeconds = 600.0;
constexpr double kGeneratedSeconds = 900.0;
constexpr double kNormalizationTolerance = 1e-9;
constexpr double kPerplexityTolerance = 1e-9;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void perturb(nk::ParameterRefs params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (nk::Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] += rng.uniform(-scale, scale);
    }
  }
}

std::size_t parameter_count(nk::ParameterRefs params) {
  std::size_t n = 0;
  for (nk::Parameter* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Vocabulary numbered_vocab(int n) {
  std::vector<std::string> words;
  for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
  return Vocabulary::from_tokens(words);
}

WordSequence random_sequence(Rng& rng, int vocab_words, int min_len, int max_len) {
  WordSequence s;
  const int n = min_len + static_cast<int>(rng.index(max_len - min_len + 1));
  for (int k = 0; k < n; ++k) {
    s.words.push_back(kNumReserved + static_cast<TokenId>(rng.index(vocab_words)));
  }
  return s;
}

// ---- 1: annotation oracle equivalence ----

Outcome annotation_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  long mismatches = 0;
  auto compare = [&](const std::vector<TokenId>& ref, const std::vector<TokenId>& hyp) {
    oracle::BruteForceAnnotator brute(ref, hyp);
    for (bool del : {false, true}) {
      for (bool ins : {false, true}) {
        const AnnotatedPair p =
            annotate(edit_align(ref, hyp), WordSequence{ref}, WordSequence{hyp}, {del, ins});
        if (p.word_labels != brute.labels(del, ins)) ++mismatches;
      }
    }
  };
  const long visited =
      oracle::for_each_canonical_pair(kOracleMaxLen, kOracleSymbols, kNumReserved, compare);
  Rng rng(2024);
  long cost_mismatches = 0;
  for (int k = 0; k < kOracleRandomPairs; ++k) {
    const WordSequence ref = random_sequence(rng, 6, 7, 14);
    WordSequence hyp;
    for (TokenId w : ref.words) {
      const double u = rng.uniform();
      if (u < 0.1) continue;
      hyp.words.push_back(u < 0.25 ? kNumReserved + static_cast<TokenId>(rng.index(6)) : w);
      if (rng.bernoulli(0.08)) {
        hyp.words.push_back(kNumReserved + static_cast<TokenId>(rng.index(6)));
      }
    }
    compare(ref.words, hyp.words);
    oracle::BruteForceAnnotator brute(ref.words, hyp.words);
    if (edit_distance(std::span<const TokenId>(ref.words),
                      std::span<const TokenId>(hyp.words)) != brute.cost()) {
      ++cost_mismatches;
    }
  }
  const double secs = seconds_since(t0);
  o.check(mismatches == 0, std::to_string(visited) + " canonical pairs (length <= " +
                               std::to_string(kOracleMaxLen) + ", " +
                               std::to_string(kOracleSymbols) + " words) and " +
                               std::to_string(kOracleRandomPairs) +
                               " random longer pairs x 4 flag settings, " +
                               std::to_string(mismatches) + " label mismatches");
  o.check(cost_mismatches == 0,
          std::to_string(cost_mismatches) + " edit-distance mismatches on random pairs");
  o.check(secs < kOracleSeconds, "runtime " + fmt(secs, 3) + " s < " + fmt(kOracleSeconds) + " s");
  return o;
}

// ---- 2: fallibility oracle agreement ----

Outcome fallibility_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  // Reference words w0..w9; confusions land on w10..w13, outside every
  // reference. No word repeats at adjacent positions: deleting either copy
  // of a repeated word gives the same hypothesis, and the annotation then
  // labels the first copy whichever one the channel dropped.
  const Vocabulary vocab = numbered_vocab(14);
  Rng rng(31);
  ChannelModel channel(vocab.size());
  for (int w = 0; w < 10; ++w) {
    const TokenId id = kNumReserved + w;
    const double rho = rng.uniform(0.0, 0.2);
    std::vector<WeightedWord> conf;
    const double p = rng.uniform(0.2, 0.8);
    conf.push_back({kNumReserved + 10 + static_cast<TokenId>(rng.index(2)), p});
    conf.push_back({kNumReserved + 12 + static_cast<TokenId>(rng.index(2)), 1.0 - p});
    channel.set_substitution(id, rho, conf);
    channel.set_deletion(id, rng.uniform(0.0, 0.05));
  }
  channel.set_seed(77);
  channel.validate();
  double worst = 0.0;
  int positions = 0;
  for (int s = 0; s < kFallibilitySequences; ++s) {
    WordSequence ref = random_sequence(rng, 10, 2, 8);
    for (std::size_t t = 1; t < ref.size(); ++t) {
      while (ref.words[t] == ref.words[t - 1]) {
        ref.words[t] = kNumReserved + static_cast<TokenId>(rng.index(10));
      }
    }
    for (std::size_t t = 0; t < ref.size(); ++t) {
      const double exact = exact_fallibility(ref, t, channel);
      const double mc = monte_carlo_fallibility(ref, t, channel, kFallibilitySamples);
      worst = std::max(worst, std::abs(exact - mc));
      ++positions;
    }
  }
  const double secs = seconds_since(t0);
  o.check(worst <= kFallibilityTolerance,
          "max |MC - exact| = " + fmt(worst) + " over " + std::to_string(positions) +
              " positions of " + std::to_string(kFallibilitySequences) + " sequences (" +
              std::to_string(kFallibilitySamples) + " samples, tolerance " +
              fmt(kFallibilityTolerance) + ")");
  o.check(secs < kFallibilitySeconds,
          "runtime " + fmt(secs, 3) + " s < " + fmt(kFallibilitySeconds) + " s");
  return o;
}

// ---- 3: gradient correctness ----

void report_grad(Outcome& o, const std::string& name, const nk::GradCheckReport& r,
                 std::size_t params) {
  o.check(params >= kGradMinParams, name + ": " + std::to_string(params) + " parameters");
  o.check(r.passed && r.max_rel_error < kGradTolerance,
          name + ": max relative error " + fmt(r.max_rel_error, 3) + " (" + r.worst_block + ")");
}

Outcome gradients() {
  Outcome o;
  const Vocabulary vocab = numbered_vocab(16);
  {
    PredictorConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 10;
    PredictorModel model(vocab, c);
    perturb(model.parameters(), 3, 0.3);
    const std::vector<std::vector<TokenId>> inputs = {{4, 5, 6, kEos}, {7, 4, 9, kEos}};
    const std::vector<std::vector<Label>> labels = {{0, 1, 0, 1}, {1, 0, 0, 0}};
    report_grad(o, "predictor",
                nk::grad_check([&](nk::Tape& t) { return model.batch_loss(t, inputs, labels); },
                               model.parameters(), kGradTolerance),
                parameter_count(model.parameters()));
  }
  {
    GeneratorConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 13;
    c.lambda = 1.0;
    GeneratorModel model(vocab, c);
    perturb(model.parameters(), 4, 0.3);
    std::vector<AnnotatedPair> pairs(2);
    pairs[0].reference = WordSequence{{4, 9, 12, 5}};
    pairs[0].word_labels = {0, 1, 0, 1, 0};
    pairs[1].reference = WordSequence{{6, 8, 3, 14}};
    pairs[1].word_labels = {1, 0, 0, 0, 1};
    for (auto& p : pairs) p.hypothesis = p.reference;
    const std::vector<const AnnotatedPair*> batch = {&pairs[0], &pairs[1]};
    const auto r = nk::grad_check([&](nk::Tape& t) { return model.batch_loss(t, batch); },
                                  model.parameters(), kGradTolerance);
    bool both_heads = false;
    for (const auto& b : r.blocks) both_heads = both_heads || b.name == "cls_head.weight";
    report_grad(o, "generator (LM and classification heads)", r,
                parameter_count(model.parameters()));
    o.check(both_heads, "generator: classification head included in the check");
  }
  {
    NnlmConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 14;
    NnlmModel model(vocab, c);
    perturb(model.parameters(), 7, 0.3);
    const std::vector<TokenId> x = {3, 4, 6};
    const std::vector<TokenId> y = {3, 5, 12};
    const std::vector<std::vector<double>> w = {{0.25, 0.75, 0.25, 0.25},
                                                {0.25, 0.25, 0.25, 0.5}};
    report_grad(o, "nnlm (weighted)",
                nk::grad_check([&](nk::Tape& t) { return model.batch_loss(t, {&x, &y}, w); },
                               model.parameters(), kGradTolerance),
                parameter_count(model.parameters()));
  }
  return o;
}

// ---- 4: conventional-training degeneracy ----

bool same_bits(NnlmModel& a, NnlmModel& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k]->value.size() != pb[k]->value.size() ||
        std::memcmp(pa[k]->value.data(), pb[k]->value.data(),
                    sizeof(double) * static_cast<std::size_t>(pa[k]->value.size())) != 0) {
      return false;
    }
  }
  return true;
}

Outcome conventional_degeneracy() {
  Outcome o;
  const Vocabulary vocab = numbered_vocab(12);
  Rng rng(5);
  std::vector<ScoredSequence> corpus;
  for (int k = 0; k < 200; ++k) {
    ScoredSequence s;
    s.words = random_sequence(rng, 12, 2, 7);
    for (std::size_t j = 0; j <= s.words.size(); ++j) s.word_scores.push_back(rng.uniform());
    corpus.push_back(std::move(s));
  }
  NnlmConfig one;
  one.embed_dim = 8;
  one.hidden_dim = 12;
  one.alpha = 1.0;
  one.train.epochs = 2;
  one.train.batch_size = 16;
  one.train.seed = 41;
  NnlmConfig conventional = one;
  conventional.objective = Objective::kConventional;
  NnlmReport ra, rb;
  NnlmModel a = train_nnlm({{corpus, 1.0}}, vocab, one, &ra);
  NnlmModel b = train_nnlm({{corpus, 1.0}}, vocab, conventional, &rb);
  o.check(same_bits(a, b), "alpha = 1 checkpoint is bit-identical to the unweighted trainer");
  double worst = 0.0;
  const auto& la = ra.training.batch_losses;
  const auto& lb = rb.training.batch_losses;
  for (std::size_t k = 0; k < std::min(la.size(), lb.size()); ++k) {
    worst = std::max(worst, std::abs(la[k] - lb[k]));
  }
  o.check(la.size() == lb.size() && !la.empty() && worst <= kBatchLossTolerance,
          std::to_string(la.size()) + " per-batch losses, max difference " + fmt(worst, 3));

  // Unit-weight batch loss against mean NLL from inference log-probs.
  NnlmModel model(vocab, one);
  perturb(model.parameters(), 9, 0.3);
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int len = 2 + trial % 5;
    std::vector<std::vector<TokenId>> seqs;
    for (int r = 0; r < 4; ++r) seqs.push_back(random_sequence(rng, 12, len, len).words);
    std::vector<const std::vector<TokenId>*> ptrs;
    std::vector<std::vector<double>> w;
    double oracle = 0.0;
    for (const auto& s : seqs) {
      ptrs.push_back(&s);
      const double scale = 1.0 / static_cast<double>((s.size() + 1) * seqs.size());
      w.emplace_back(s.size() + 1, scale);
      double nll = 0.0;
      for (double lp : model.token_log_probs(s)) nll -= lp;
      oracle += nll * scale;
    }
    nk::Tape tape;
    const double loss = tape.value(model.batch_loss(tape, ptrs, w))(0, 0);
    worst_oracle = std::max(worst_oracle, std::abs(loss - oracle));
  }
  o.check(worst_oracle <= kBatchLossTolerance,
          "unit-weight batch loss vs mean NLL oracle, max difference " + fmt(worst_oracle, 3));
  return o;
}

// ---- 5-7 and 9: the experiment ----

struct ExperimentRuns {
  bool ok = false;
  std::string error;
  nlohmann::json report;
  double first_seconds = 0.0;
  std::string manifest_a, manifest_b;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ExperimentRuns run_experiments(const fs::path& config, const fs::path& work, bool twice) {
  ExperimentRuns runs;
  for (int k = 0; k < (twice ? 2 : 1); ++k) {
    const fs::path out = work / ("run" + std::to_string(k + 1));
    fs::remove_all(out);
    std::ostringstream sink, err;
    std::cerr << "running run-experiment (" << (k + 1) << ") with " << config.string() << '\n';
    const auto t0 = std::chrono::steady_clock::now();
    const int code =
        cli::run({"--config", config.string(), "--out", out.string(), "run-experiment"}, sink, err);
    if (k == 0) runs.first_seconds = seconds_since(t0);
    if (code != 0) {
      runs.error = err.str();
      return runs;
    }
    (k == 0 ? runs.manifest_a : runs.manifest_b) = slurp(out / "manifest.json");
    if (k == 0) {
      runs.report = nlohmann::json::parse(slurp(out / "report.json"));
      std::cerr << slurp(out / "report.txt");
    }
  }
  runs.ok = true;
  return runs;
}

const nlohmann::json* find_row(const nlohmann::json& report, const std::string& condition,
                               const std::string& scores, double alpha) {
  for (const auto& r : report["rows"]) {
    if (r["condition"] == condition && r["scores"] == scores && r["alpha"] == alpha) {
      return &r;
    }
  }
  return nullptr;
}

double row_wer(const nlohmann::json& row) { return row["wer"].get<double>(); }

Outcome alpha_sweep(const ExperimentRuns& runs) {
  Outcome o;
  if (!runs.ok) {
    o.check(false, "experiment failed: " + runs.error);
    return o;
  }
  const auto& data = runs.report["data"];
  o.notes.push_back("asr-only WER " + fmt(runs.report["asr_only"]["wer"].get<double>()) +
                    ", fallible type fraction " +
                    fmt(data["target_fallible_type_fraction"].get<double>()) +
                    ", annotated error label rate " +
                    fmt(data["annotated_error_label_rate"].get<double>()));
  const auto* a1 = find_row(runs.report, "real_text", "target", 1.0);
  const auto* a3 = find_row(runs.report, "real_text", "target", 3.0);
  const auto* a8 = find_row(runs.report, "real_text", "target", 8.0);
  if (!a1 || !a3 || !a8) {
    o.check(false, "report lacks real_text rows for alpha 1, 3 and 8");
    return o;
  }
  const double gain = relative_reduction(row_wer(*a1), row_wer(*a3));
  o.check(gain >= kAlphaSweepMinGain, "WER alpha=1 " + fmt(row_wer(*a1)) + ", alpha=3 " +
                                          fmt(row_wer(*a3)) + ": relative gain " +
                                          fmt(100 * gain, 3) + "% >= " +
                                          fmt(100 * kAlphaSweepMinGain) + "%");
  o.check(row_wer(*a8) > row_wer(*a3),
          "WER alpha=8 " + fmt(row_wer(*a8)) + " > alpha=3 " + fmt(row_wer(*a3)));
  o.check(runs.first_seconds < kAlphaSweepSeconds,
          "full run " + fmt(runs.first_seconds, 4) + " s < " + fmt(kAlphaSweepSeconds) + " s");
  return o;
}

Outcome generated_text(const ExperimentRuns& runs) {
  Outcome o;
  if (!runs.ok) {
    o.check(false, "experiment failed: " + runs.error);
    return o;
  }
  const auto* mismatch = find_row(runs.report, "generated_text", "none", 1.0);
  const auto* g1 = find_row(runs.report, "generated_text", "generator", 1.0);
  const auto* g3 = find_row(runs.report, "generated_text", "generator", 3.0);
  if (!mismatch || !g1 || !g3) {
    o.check(false, "report lacks generated_text rows");
    return o;
  }
  o.check(row_wer(*g1) < row_wer(*mismatch),
          "generated text WER " + fmt(row_wer(*g1)) + " < mismatched text WER " +
              fmt(row_wer(*mismatch)));
  o.check(row_wer(*g3) < row_wer(*g1), "generated text alpha=3 WER " + fmt(row_wer(*g3)) +
                                           " < alpha=1 WER " + fmt(row_wer(*g1)));
  o.check(runs.first_seconds < kGeneratedSeconds,
          "full run " + fmt(runs.first_seconds, 4) + " s < " + fmt(kGeneratedSeconds) + " s");
  return o;
}

Outcome annotation_transfer(const ExperimentRuns& runs) {
  Outcome o;
  if (!runs.ok) {
    o.check(false, "experiment failed: " + runs.error);
    return o;
  }
  const auto* t1 = find_row(runs.report, "annotation_transfer", "transfer", 1.0);
  const auto* t3 = find_row(runs.report, "annotation_transfer", "transfer", 3.0);
  const auto* a1 = find_row(runs.report, "real_text", "target", 1.0);
  const auto* a3 = find_row(runs.report, "real_text", "target", 3.0);
  if (!t1 || !t3 || !a1 || !a3) {
    o.check(false, "report lacks annotation_transfer or real_text rows");
    return o;
  }
  const double transfer_gain = relative_reduction(row_wer(*t1), row_wer(*t3));
  const double in_domain_gain = relative_reduction(row_wer(*a1), row_wer(*a3));
  o.check(row_wer(*t3) <= row_wer(*t1), "transferred annotation alpha=3 WER " +
                                            fmt(row_wer(*t3)) + " <= alpha=1 WER " +
                                            fmt(row_wer(*t1)));
  o.check(transfer_gain <= in_domain_gain,
          "transfer gain " + fmt(100 * transfer_gain, 3) + "% <= in-domain gain " +
              fmt(100 * in_domain_gain, 3) + "%");
  return o;
}

Outcome determinism(const ExperimentRuns& runs) {
  Outcome o;
  if (!runs.ok) {
    o.check(false, "experiment failed: " + runs.error);
    return o;
  }
  o.check(!runs.manifest_a.empty() && runs.manifest_a == runs.manifest_b,
          "two run-experiment manifests are byte-identical (" +
              std::to_string(runs.manifest_a.size()) + " bytes)");
  return o;
}

// ---- 8: interface invariants ----

Outcome invariants() {
  Outcome o;
  Rng rng(8);

  long assembly_failures = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Span> spans;
    int cursor = 0;
    const int words = 1 + static_cast<int>(rng.index(6));
    for (int k = 0; k < words; ++k) {
      const int len = 1 + static_cast<int>(rng.index(4));
      spans.push_back({cursor, cursor + len});
      cursor += len;
    }
    std::vector<double> scores(static_cast<std::size_t>(cursor) + 1);
    for (double& s : scores) s = rng.uniform();
    const auto word_scores = assemble_word_scores(scores, spans);
    for (int k = 0; k < words; ++k) {
      double best = 0.0;
      for (int j = spans[k].begin; j < spans[k].end; ++j) best = std::max(best, scores[j]);
      if (word_scores[k] != best) ++assembly_failures;
    }
    if (word_scores.back() != scores.back()) ++assembly_failures;
    const TokenizedSequence singleton =
        word_level(WordSequence{std::vector<TokenId>(word_scores.size() - 1, kNumReserved)});
    if (assemble_word_scores(word_scores, singleton.word_spans) != word_scores) {
      ++assembly_failures;
    }
  }
  o.check(assembly_failures == 0, "max-rule assembly dominance and idempotence, 500 cases");

  std::vector<std::string> surface;
  while (surface.size() < 40) {
    std::string w;
    const int len = 1 + static_cast<int>(rng.index(9));
    for (int k = 0; k < len; ++k) w += static_cast<char>('a' + rng.index(5));
    if (std::find(surface.begin(), surface.end(), w) == surface.end()) surface.push_back(w);
  }
  const Vocabulary words = Vocabulary::from_tokens(surface);
  long round_trip_failures = 0;
  for (int chunk = 1; chunk <= 4; ++chunk) {
    SubwordTokenizer tok(words, chunk);
    for (int trial = 0; trial < 200; ++trial) {
      const WordSequence seq = random_sequence(rng, 40, 0, 8);
      const TokenizedSequence t = tok.tokenize(seq);
      if (!(tok.detokenize(t) == seq) || t.word_spans.size() != seq.size()) {
        ++round_trip_failures;
      }
    }
  }
  o.check(round_trip_failures == 0, "subword tokenization round trip, 800 sequences");

  const Vocabulary vocab = numbered_vocab(14);
  double worst_mass = 0.0;
  double worst_ppl = 0.0;
  for (Granularity g : {Granularity::kWord, Granularity::kSubword}) {
    NnlmConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 12;
    c.granularity = g;
    c.chunk_len = 2;
    NnlmModel model(vocab, c);
    perturb(model.parameters(), 12, 0.4);
    std::vector<WordSequence> corpus;
    for (int k = 0; k < 30; ++k) corpus.push_back(random_sequence(rng, 14, 1, 7));
    double nll = 0.0;
    long count = 0;
    for (const auto& seq : corpus) {
      const auto tokens = model.tokenize(seq).tokens;
      for (std::size_t j = 0; j <= tokens.size(); ++j) {
        const nk::RowVector lp =
            model.next_log_probs(std::span<const TokenId>(tokens.data(), j));
        worst_mass = std::max(worst_mass, std::abs(lp.array().exp().sum() - 1.0));
        nll -= lp(j < tokens.size() ? tokens[j] : kEos);
        ++count;
      }
    }
    const double recomputed = std::exp(nll / static_cast<double>(count));
    worst_ppl = std::max(worst_ppl, std::abs(perplexity(model, corpus) - recomputed) / recomputed);
  }
  o.check(worst_mass <= kNormalizationTolerance,
          "NNLM next-token distributions sum to 1 within " + fmt(worst_mass, 3));
  o.check(worst_ppl <= kPerplexityTolerance,
          "PPL = exp(mean NLL) recomputation, relative difference " + fmt(worst_ppl, 3));

  NnlmConfig c;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  NnlmModel model(vocab, c);
  perturb(model.parameters(), 13, 0.5);
  long degeneracy_failures = 0;
  for (int trial = 0; trial < 300; ++trial) {
    NBestList list;
    const int n = 1 + static_cast<int>(rng.index(8));
    double score = 0.0;
    for (int k = 0; k < n; ++k) {
      score -= rng.uniform(0.0, 2.0) * (k > 0);
      list.entries.push_back({random_sequence(rng, 14, 1, 6), score});
    }
    FusionConfig f;
    f.beta = 0.0;
    if (!(fuse_rescore(list, model, f) == list.entries.front().hypothesis)) {
      ++degeneracy_failures;
    }
  }
  o.check(degeneracy_failures == 0, "beta = 0 fusion returns the top ASR hypothesis, 300 lists");
  return o;
}

}  // namespace
}  // namespace cflm::acceptance

int main(int argc, char** argv) {
  using namespace cflm::acceptance;
  CLI::App app{"cflm acceptance suite"};
  std::string config;
  std::string work = (fs::temp_directory_path() / "cflm_acceptance").string();
  std::vector<int> only;
  app.add_option("--config", config, "Experiment spec for criteria 5-7 and 9")->required();
  app.add_option("--work", work, "Scratch directory for experiment runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int k) {
    return only.empty() || std::find(only.begin(), only.end(), k) != only.end();
  };
  ExperimentRuns runs;
  if (wanted(5) || wanted(6) || wanted(7) || wanted(9)) {
    fs::create_directories(work);
    runs = run_experiments(config, work, wanted(9));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"annotation oracle equivalence", annotation_oracle},
      {"fallibility oracle agreement", fallibility_oracle},
      {"gradient correctness", gradients},
      {"conventional-training degeneracy", conventional_degeneracy},
      {"alpha-sweep shape", [&] { return alpha_sweep(runs); }},
      {"generated-text adaptation", [&] { return generated_text(runs); }},
      {"annotation-domain transfer", [&] { return annotation_transfer(runs); }},
      {"interface invariants", invariants},
      {"determinism", [&] { return determinism(runs); }},
  };
  bool all = true;
  std::vector<std::string> summary;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    for (const auto& note : o.notes) std::cout << "  [" << id << "] " << note << '\n';
    summary.push_back("criterion " + std::to_string(id) + " " + (o.pass ? "PASS" : "FAIL") +
                      ": " + criteria[k].first);
    std::cout << summary.back() << std::endl;
  }
  std::cout << "\nsummary\n";
  for (const auto& line : summary) std::cout << line << '\n';
  return all ? 0 : 1;
}
