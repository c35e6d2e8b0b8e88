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


#include "cflm/experiment.h"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cflm/align.h"
#include "cflm/asrsim.h"

namespace cflm {
namespace {

SyntheticDomainConfig domain_from(const nlohmann::json& j, const char* key,
                                  std::uint64_t default_seed) {
  SyntheticDomainConfig c;
  c.seed = default_seed;
  if (j.contains("domains") && j["domains"].contains(key)) {
    nlohmann::json d = j["domains"][key];
    if (!d.contains("seed")) d["seed"] = default_seed;
    c = SyntheticDomainConfig::from_json(d);
  }
  return c;
}

template <typename F>
auto stage(const std::string& name, const ProgressFn& progress, F&& f) {
  if (progress) progress(name);
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error("stage " + name + ": " + e.what());
  }
}

std::string alpha_label(double alpha) {
  std::ostringstream out;
  out << alpha;
  return out.str();
}

std::vector<WordSequence> encode_all(
    const std::vector<std::vector<std::string>>& sentences,
    const Vocabulary& vocab) {
  std::vector<WordSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode(s, vocab));
  return out;
}

std::vector<RefHypPair> corrupt_all(const std::vector<WordSequence>& refs,
                                    const ChannelModel& channel, Rng& rng) {
  std::vector<RefHypPair> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r, corrupt(r, channel, rng)});
  return out;
}

// Test-time data shared by every NNLM under evaluation.
struct EvalSet {
  std::vector<WordSequence> dev_refs;
  std::vector<NBestList> dev_lists;
  std::vector<WordSequence> test_refs;
  std::vector<NBestList> test_lists;
};

void evaluate_lm(const NnlmModel& model, const EvalSet& eval,
                 const ExperimentSpec& spec, ConditionResult& r) {
  const ScoredNBest dev = score_nbest_lists(eval.dev_lists, model);
  const BetaSearch search =
      tune_beta(dev, eval.dev_refs, spec.beta_grid, spec.fusion);
  r.betas.push_back(search.best_beta);
  for (std::size_t k = 0; k < search.grid.size(); ++k) {
    if (search.grid[k] == search.best_beta) r.dev_wers.push_back(search.wer[k]);
  }
  FusionConfig fusion = spec.fusion;
  fusion.beta = search.best_beta;
  const WerReport test = evaluate_wer(
      eval.test_refs,
      rescore_all(score_nbest_lists(eval.test_lists, model), fusion));
  r.wers.push_back(test.wer);
  r.ppls.push_back(perplexity(model, eval.test_refs));
  r.test.substitutions += test.substitutions;
  r.test.deletions += test.deletions;
  r.test.insertions += test.insertions;
  r.test.reference_words += test.reference_words;
  const long errors = r.test.substitutions + r.test.deletions + r.test.insertions;
  r.test.wer = static_cast<double>(errors) /
               static_cast<double>(std::max(1L, r.test.reference_words));
  double ppl = 0.0;
  for (double p : r.ppls) ppl += p;
  r.ppl = ppl / static_cast<double>(r.ppls.size());
}

// Mean predicted score on fallible, shared-fallible and other words.
nlohmann::json score_summary(const std::vector<ScoredSequence>& corpus,
                             const SyntheticDomain& domain,
                             const Vocabulary& vocab) {
  double sums[3] = {0.0, 0.0, 0.0};
  long counts[3] = {0, 0, 0};
  for (const auto& s : corpus) {
    for (std::size_t k = 0; k < s.words.size(); ++k) {
      const std::string& w = vocab.token(s.words.words[k]);
      const int bucket = domain.shared_fallible().count(w) ? 1
                         : domain.fallible().count(w)      ? 0
                                                           : 2;
      sums[bucket] += s.word_scores[k];
      ++counts[bucket];
    }
  }
  auto mean = [&](int b) { return counts[b] ? sums[b] / counts[b] : 0.0; };
  return {{"domain_specific_fallible", mean(0)},
          {"shared_fallible", mean(1)},
          {"other", mean(2)}};
}

void fill_relative(std::vector<ConditionResult>& rows) {
  for (auto& r : rows) {
    for (const auto& base : rows) {
      if (base.condition == r.condition && base.scores == r.scores &&
          base.text == r.text && base.alpha == 1.0) {
        r.rel_vs_alpha1 = relative_reduction(base.test.wer, r.test.wer);
      }
    }
  }
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  s.seed = j.value("seed", s.seed);
  s.shared_seed = j.value("shared_seed", s.shared_seed);
  s.target = domain_from(j, "target", derive_seed(s.seed, "domain-target"));
  s.transfer = domain_from(j, "transfer", derive_seed(s.seed, "domain-transfer"));
  s.mismatch = domain_from(j, "mismatch", derive_seed(s.seed, "domain-mismatch"));
  if (j.contains("sizes")) {
    const auto& z = j["sizes"];
    s.sizes.text = z.value("text", s.sizes.text);
    s.sizes.annotated = z.value("annotated", s.sizes.annotated);
    s.sizes.transfer_annotated =
        z.value("transfer_annotated", s.sizes.transfer_annotated);
    s.sizes.generator_pairs = z.value("generator_pairs", s.sizes.generator_pairs);
    s.sizes.generated = z.value("generated", s.sizes.generated);
    s.sizes.mismatch_text = z.value("mismatch_text", s.sizes.mismatch_text);
    s.sizes.dev = z.value("dev", s.sizes.dev);
    s.sizes.test = z.value("test", s.sizes.test);
  }
  if (j.contains("annotation")) {
    s.annotation.annotate_deletions =
        j["annotation"].value("deletions", s.annotation.annotate_deletions);
    s.annotation.annotate_insertions =
        j["annotation"].value("insertions", s.annotation.annotate_insertions);
  }
  if (j.contains("predictor")) s.predictor = PredictorConfig::from_json(j["predictor"]);
  if (j.contains("generator")) s.generator = GeneratorConfig::from_json(j["generator"]);
  if (j.contains("generation")) {
    s.generation = GenerationConfig::from_json(j["generation"]);
  }
  if (j.contains("nnlm")) s.nnlm = NnlmConfig::from_json(j["nnlm"]);
  s.alphas = j.value("alphas", s.alphas);
  s.secondary_alphas = j.value("secondary_alphas", s.secondary_alphas);
  s.replicates = j.value("replicates", s.replicates);
  if (s.replicates < 1) throw Error("experiment: replicates must be >= 1");
  s.beta_grid = j.value("beta_grid", s.beta_grid);
  if (j.contains("fusion")) s.fusion = FusionConfig::from_json(j["fusion"]);
  s.first_pass_prior_weight =
      j.value("first_pass_prior_weight", s.first_pass_prior_weight);
  if (!std::isfinite(s.first_pass_prior_weight) || s.first_pass_prior_weight < 0.0) {
    throw Error("experiment: first_pass_prior_weight must be finite and >= 0");
  }
  if (j.contains("conditions")) {
    const auto& c = j["conditions"];
    s.real_text = c.value("real_text", s.real_text);
    s.generated_text = c.value("generated_text", s.generated_text);
    s.annotation_transfer = c.value("annotation_transfer", s.annotation_transfer);
  }
  if (s.alphas.empty()) throw Error("experiment: empty alpha list");
  if (s.beta_grid.empty()) throw Error("experiment: empty beta grid");
  for (double a : s.alphas) token_weight(0.0, a);
  for (double a : s.secondary_alphas) token_weight(0.0, a);
  s.fusion.validate();
  return s;
}

nlohmann::json ExperimentSpec::to_json() const {
  return {{"seed", seed},
          {"shared_seed", shared_seed},
          {"domains",
           {{"target", target.to_json()},
            {"transfer", transfer.to_json()},
            {"mismatch", mismatch.to_json()}}},
          {"sizes",
           {{"text", sizes.text},
            {"annotated", sizes.annotated},
            {"transfer_annotated", sizes.transfer_annotated},
            {"generator_pairs", sizes.generator_pairs},
            {"generated", sizes.generated},
            {"mismatch_text", sizes.mismatch_text},
            {"dev", sizes.dev},
            {"test", sizes.test}}},
          {"annotation",
           {{"deletions", annotation.annotate_deletions},
            {"insertions", annotation.annotate_insertions}}},
          {"predictor", predictor.to_json()},
          {"generator", generator.to_json()},
          {"generation", generation.to_json()},
          {"nnlm", nnlm.to_json()},
          {"alphas", alphas},
          {"secondary_alphas", secondary_alphas},
          {"replicates", replicates},
          {"beta_grid", beta_grid},
          {"fusion", fusion.to_json()},
          {"first_pass_prior_weight", first_pass_prior_weight},
          {"conditions",
           {{"real_text", real_text},
            {"generated_text", generated_text},
            {"annotation_transfer", annotation_transfer}}}};
}

nlohmann::json ConditionResult::to_json() const {
  return {{"condition", condition},
          {"text", text},
          {"scores", scores},
          {"alpha", alpha},
          {"wer", test.wer},
          {"ppl", ppl},
          {"rel_wer_reduction_vs_alpha1", rel_vs_alpha1},
          {"errors", test.to_json()},
          {"replicates",
           {{"beta", betas}, {"dev_wer", dev_wers}, {"wer", wers}, {"ppl", ppls}}}};
}

const ConditionResult& ExperimentReport::find(std::string_view condition,
                                              std::string_view scores,
                                              double alpha) const {
  for (const auto& r : rows) {
    if (r.condition == condition && r.scores == scores && r.alpha == alpha) {
      return r;
    }
  }
  throw Error("experiment report has no row " + std::string(condition) + "/" +
              std::string(scores) + "/alpha=" + alpha_label(alpha));
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json out_rows = nlohmann::json::array();
  for (const auto& r : rows) out_rows.push_back(r.to_json());
  return {{"spec", spec},
          {"data", data},
          {"asr_only", asr_only.to_json()},
          {"oracle", oracle.to_json()},
          {"rows", out_rows}};
}

std::string ExperimentReport::table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %-10s %-10s %6s %8s %8s %8s\n",
                "condition", "text", "scores", "alpha", "WER(%)", "rel(%)", "PPL");
  out << line;
  std::snprintf(line, sizeof(line), "%-20s %-10s %-10s %6s %8.2f %8s %8s\n",
                "asr-only", "-", "-", "-", 100.0 * asr_only.wer, "-", "-");
  out << line;
  std::snprintf(line, sizeof(line), "%-20s %-10s %-10s %6s %8.2f %8s %8s\n",
                "n-best oracle", "-", "-", "-", 100.0 * oracle.wer, "-", "-");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-20s %-10s %-10s %6g %8.2f %8.2f %8.3f\n",
                  r.condition.c_str(), r.text.c_str(), r.scores.c_str(), r.alpha,
                  100.0 * r.test.wer, 100.0 * r.rel_vs_alpha1, r.ppl);
    out << line;
  }
  return out.str();
}

ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const ProgressFn& progress) {
  ExperimentReport report;
  report.spec = spec.to_json();

  const auto [target, transfer, mismatch] = stage("build-domains", progress, [&] {
    return std::make_tuple(SyntheticDomain(spec.target, spec.shared_seed),
                           SyntheticDomain(spec.transfer, spec.shared_seed),
                           SyntheticDomain(spec.mismatch, spec.shared_seed));
  });
  const Vocabulary vocab = stage("build-vocabulary", progress, [&] {
    std::vector<std::string> words;
    std::set<std::string> seen;
    for (const SyntheticDomain* d : {&target, &transfer, &mismatch}) {
      for (const auto& w : d->words()) {
        if (seen.insert(w).second) words.push_back(w);
      }
    }
    return Vocabulary::from_tokens(words);
  });
  const auto [target_channel, transfer_channel] = stage("build-channels", progress, [&] {
    return std::make_pair(ChannelModel::from_json(target.channel_json(), vocab),
                          ChannelModel::from_json(transfer.channel_json(), vocab));
  });

  auto sample = [&](const SyntheticDomain& d, std::size_t n, const char* name) {
    return stage(std::string("sample-") + name, progress, [&] {
      Rng rng(derive_seed(spec.seed, std::string("sample-") + name));
      return encode_all(d.sample(n, rng), vocab);
    });
  };
  const auto text = sample(target, spec.sizes.text, "text");
  const auto annotated_refs = sample(target, spec.sizes.annotated, "annotated");
  const auto dev_refs = sample(target, spec.sizes.dev, "dev");
  const auto test_refs = sample(target, spec.sizes.test, "test");

  auto annotate_set = [&](const std::vector<WordSequence>& refs,
                          const ChannelModel& channel, const char* name) {
    return stage(std::string("annotate-") + name, progress, [&] {
      Rng rng(derive_seed(spec.seed, std::string("corrupt-") + name));
      return annotate_corpus(corrupt_all(refs, channel, rng), spec.annotation);
    });
  };
  const auto annotated = annotate_set(annotated_refs, target_channel, "annotated");

  EvalSet eval = stage("decode", progress, [&] {
    EvalSet e;
    e.dev_refs = dev_refs;
    e.test_refs = test_refs;
    Rng dev_rng(derive_seed(spec.seed, "decode-dev"));
    for (const auto& r : dev_refs) {
      e.dev_lists.push_back(decode_nbest(r, target_channel, spec.fusion.n, dev_rng));
    }
    Rng test_rng(derive_seed(spec.seed, "decode-test"));
    for (const auto& r : test_refs) {
      e.test_lists.push_back(
          decode_nbest(r, target_channel, spec.fusion.n, test_rng));
    }
    if (spec.first_pass_prior_weight > 0.0) {
      const auto prior = unigram_log_prior(text, vocab.size());
      for (auto* lists : {&e.dev_lists, &e.test_lists}) {
        for (auto& l : *lists) add_first_pass_prior(l, prior, spec.first_pass_prior_weight);
      }
    }
    return e;
  });

  stage("baseline", progress, [&] {
    std::vector<WordSequence> top, best;
    for (std::size_t k = 0; k < eval.test_lists.size(); ++k) {
      const auto& entries = eval.test_lists[k].entries;
      top.push_back(entries.front().hypothesis);
      std::size_t arg = 0;
      int dist = -1;
      for (std::size_t h = 0; h < entries.size(); ++h) {
        const int d = edit_distance(std::span<const TokenId>(test_refs[k].words),
                                    std::span<const TokenId>(entries[h].hypothesis.words));
        if (dist < 0 || d < dist) {
          dist = d;
          arg = h;
        }
      }
      best.push_back(entries[arg].hypothesis);
    }
    report.asr_only = evaluate_wer(test_refs, top);
    report.oracle = evaluate_wer(test_refs, best);
    return 0;
  });

  long fallible_tokens = 0, tokens = 0, label_ones = 0, labels = 0;
  for (const auto& s : text) {
    for (TokenId w : s.words) fallible_tokens += target.fallible().count(vocab.token(w));
    tokens += static_cast<long>(s.size());
  }
  for (const auto& p : annotated) {
    for (Label l : p.word_labels) label_ones += l;
    labels += static_cast<long>(p.word_labels.size());
  }
  report.data = {
      {"vocabulary", vocab.size()},
      {"target_types", target.words().size()},
      {"target_fallible_types", target.fallible().size()},
      {"target_fallible_type_fraction", target.fallible_type_fraction()},
      {"target_fallible_token_fraction",
       static_cast<double>(fallible_tokens) / static_cast<double>(tokens)},
      {"annotated_error_label_rate",
       static_cast<double>(label_ones) / static_cast<double>(labels)}};

  // Trains and evaluates spec.replicates NNLMs; replicate k uses the same
  // seed for every alpha on the same text.
  auto train_and_evaluate = [&](const std::vector<ScoredSequence>& corpus,
                                const std::string& condition,
                                const std::string& text_name,
                                const std::string& scores, double alpha,
                                Objective objective) {
    ConditionResult r;
    r.condition = condition;
    r.text = text_name;
    r.scores = scores;
    r.alpha = alpha;
    const std::string tag = condition + ":" + scores + ":alpha=" + alpha_label(alpha);
    for (int k = 0; k < spec.replicates; ++k) {
      const std::string suffix = ":replicate=" + std::to_string(k);
      const NnlmModel model = stage("train-nnlm:" + tag + suffix, progress, [&] {
        NnlmConfig c = spec.nnlm;
        c.alpha = alpha;
        c.objective = objective;
        c.train.seed = derive_seed(derive_seed(spec.seed, "nnlm-" + text_name),
                                   static_cast<std::uint64_t>(k));
        return train_nnlm({{corpus, 1.0}}, vocab, c);
      });
      stage("evaluate:" + tag + suffix, progress, [&] {
        evaluate_lm(model, eval, spec, r);
        return 0;
      });
    }
    return r;
  };
  auto run_alphas = [&](const std::vector<ScoredSequence>& corpus,
                        const std::vector<double>& alphas,
                        const std::string& condition, const std::string& text_name,
                        const std::string& scores, bool skip_alpha1) {
    for (double alpha : alphas) {
      if (skip_alpha1 && alpha == 1.0) continue;
      report.rows.push_back(train_and_evaluate(corpus, condition, text_name, scores,
                                               alpha, Objective::kCorrectionFocused));
    }
  };
  auto train_scorer = [&](const std::vector<AnnotatedPair>& pairs,
                          const char* name) {
    return stage(std::string("train-predictor:") + name, progress, [&] {
      PredictorConfig c = spec.predictor;
      c.train.seed = derive_seed(spec.seed, std::string("predictor-") + name);
      return train_predictor(pairs, vocab, c);
    });
  };

  std::vector<ScoredSequence> scored_text;
  if (spec.real_text || spec.annotation_transfer) {
    const PredictorModel predictor = train_scorer(annotated, "target");
    scored_text = stage("score-text:target", progress,
                        [&] { return score_corpus(predictor, text); });
    report.data["target_scores"] = score_summary(scored_text, target, vocab);
  }
  if (spec.real_text) {
    run_alphas(scored_text, spec.alphas, "real_text", "target", "target", false);
  }

  if (spec.annotation_transfer) {
    const auto transfer_refs =
        sample(transfer, spec.sizes.transfer_annotated, "transfer-annotated");
    const auto transfer_pairs =
        annotate_set(transfer_refs, transfer_channel, "transfer-annotated");
    const PredictorModel predictor = train_scorer(transfer_pairs, "transfer");
    const auto scored = stage("score-text:transfer", progress,
                              [&] { return score_corpus(predictor, text); });
    report.data["transfer_scores"] = score_summary(scored, target, vocab);
    // alpha = 1 ignores the scores, so its row is shared with real_text.
    bool have_alpha1 = false;
    for (const auto& r : report.rows) {
      if (r.condition == "real_text" && r.alpha == 1.0) {
        ConditionResult copy = r;
        copy.condition = "annotation_transfer";
        copy.scores = "transfer";
        report.rows.push_back(copy);
        have_alpha1 = true;
        break;
      }
    }
    run_alphas(scored, spec.secondary_alphas, "annotation_transfer", "target",
               "transfer", have_alpha1);
  }

  if (spec.generated_text) {
    const auto gen_refs = sample(target, spec.sizes.generator_pairs, "generator");
    const auto gen_pairs = annotate_set(gen_refs, target_channel, "generator");
    const GeneratorModel generator = stage("train-generator", progress, [&] {
      GeneratorConfig c = spec.generator;
      c.train.seed = derive_seed(spec.seed, "generator");
      return train_generator(gen_pairs, vocab, c);
    });
    const auto generated = stage("generate", progress, [&] {
      GenerationConfig c = spec.generation;
      c.count = static_cast<int>(spec.sizes.generated);
      c.seed = derive_seed(spec.seed, "generate");
      const GenerationResult result = generate_scored(generator, c);
      FilterReport filter;
      auto kept = filter_generated(result.sequences, false, 1, c.max_len, &filter);
      report.data["generation"] = generation_report(c, result, kept, filter);
      return kept;
    });
    const auto mismatch_text = sample(mismatch, spec.sizes.mismatch_text, "mismatch");
    std::vector<ScoredSequence> unscored_mismatch;
    for (const auto& s : mismatch_text) unscored_mismatch.push_back(unscored(s));
    report.rows.push_back(train_and_evaluate(unscored_mismatch, "generated_text",
                                             "mismatch", "none", 1.0,
                                             Objective::kConventional));
    run_alphas(generated, spec.secondary_alphas, "generated_text", "generated",
               "generator", false);
  }

  fill_relative(report.rows);
  return report;
}

}  // namespace cflm
