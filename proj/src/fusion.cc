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


#include "cflm/fusion.h"

#include <cmath>

#include "cflm/align.h"

namespace cflm {

void FusionConfig::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) {
    throw Error("fusion: beta must be finite and >= 0");
  }
  if (n < 1) throw Error("fusion: n must be >= 1");
}

nlohmann::json FusionConfig::to_json() const {
  return {{"beta", beta}, {"n", n}, {"length_normalize", length_normalize}};
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
  FusionConfig c;
  c.beta = j.value("beta", c.beta);
  c.n = j.value("n", c.n);
  c.length_normalize = j.value("length_normalize", c.length_normalize);
  c.validate();
  return c;
}

std::vector<double> lm_scores(const NBestList& nbest, const NnlmModel& model) {
  std::vector<WordSequence> hyps;
  hyps.reserve(nbest.entries.size());
  for (const NBestEntry& e : nbest.entries) hyps.push_back(e.hypothesis);
  return model.log_probs(hyps);
}

double combined_score(const NBestList& nbest, std::span<const double> lm,
                      std::size_t k, const FusionConfig& config) {
  double lm_term = lm[k];
  if (config.length_normalize) {
    lm_term /= static_cast<double>(nbest.entries[k].hypothesis.size() + 1);
  }
  return nbest.entries[k].asr_score + config.beta * lm_term;
}

std::size_t choose_hypothesis(const NBestList& nbest,
                              std::span<const double> lm,
                              const FusionConfig& config) {
  if (nbest.entries.empty()) throw Error("fuse_rescore: empty n-best list");
  if (lm.size() != nbest.entries.size()) {
    throw Error("fuse_rescore: LM score count does not match the list");
  }
  std::size_t best = 0;
  double best_score = combined_score(nbest, lm, 0, config);
  for (std::size_t k = 1; k < nbest.entries.size(); ++k) {
    const double s = combined_score(nbest, lm, k, config);
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

WordSequence fuse_rescore(const NBestList& nbest, const NnlmModel& model,
                          const FusionConfig& config) {
  config.validate();
  if (nbest.entries.empty()) throw Error("fuse_rescore: empty n-best list");
  const auto lm = lm_scores(nbest, model);
  return nbest.entries[choose_hypothesis(nbest, lm, config)].hypothesis;
}

nlohmann::json WerReport::to_json() const {
  return {{"wer", wer},
          {"substitutions", substitutions},
          {"deletions", deletions},
          {"insertions", insertions},
          {"reference_words", reference_words}};
}

WerReport evaluate_wer(const std::vector<WordSequence>& references,
                       const std::vector<WordSequence>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    throw Error("evaluate_wer: " + std::to_string(references.size()) +
                " references but " + std::to_string(hypotheses.size()) +
                " hypotheses");
  }
  WerReport r;
  for (std::size_t k = 0; k < references.size(); ++k) {
    const EditScript script = edit_align(references[k], hypotheses[k]);
    r.substitutions += script.substitutions();
    r.deletions += script.deletions();
    r.insertions += script.insertions();
    r.reference_words += static_cast<long>(references[k].size());
  }
  const long errors = r.substitutions + r.deletions + r.insertions;
  if (r.reference_words > 0) {
    r.wer = static_cast<double>(errors) / static_cast<double>(r.reference_words);
  } else if (errors > 0) {
    throw Error("evaluate_wer: hypotheses contain words but references are empty");
  }
  return r;
}

double relative_reduction(double baseline, double wer) {
  return baseline == 0.0 ? 0.0 : (baseline - wer) / baseline;
}

ScoredNBest score_nbest_lists(std::vector<NBestList> lists,
                              const NnlmModel& model) {
  std::vector<WordSequence> hyps;
  for (const NBestList& l : lists) {
    for (const NBestEntry& e : l.entries) hyps.push_back(e.hypothesis);
  }
  const std::vector<double> all = model.log_probs(hyps);
  ScoredNBest out;
  out.lm.reserve(lists.size());
  std::size_t next = 0;
  for (const NBestList& l : lists) {
    out.lm.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(next),
                        all.begin() + static_cast<std::ptrdiff_t>(next + l.entries.size()));
    next += l.entries.size();
  }
  out.lists = std::move(lists);
  return out;
}

std::vector<WordSequence> rescore_all(const ScoredNBest& scored,
                                      const FusionConfig& config) {
  config.validate();
  std::vector<WordSequence> out;
  out.reserve(scored.lists.size());
  for (std::size_t k = 0; k < scored.lists.size(); ++k) {
    const NBestList& l = scored.lists[k];
    out.push_back(l.entries[choose_hypothesis(l, scored.lm[k], config)].hypothesis);
  }
  return out;
}

BetaSearch tune_beta(const ScoredNBest& dev,
                     const std::vector<WordSequence>& references,
                     std::span<const double> grid, FusionConfig base) {
  if (grid.empty()) throw Error("tune_beta: empty grid");
  BetaSearch search;
  double best = 0.0;
  for (double beta : grid) {
    base.beta = beta;
    const double wer = evaluate_wer(references, rescore_all(dev, base)).wer;
    search.grid.push_back(beta);
    search.wer.push_back(wer);
    if (search.wer.size() == 1 || wer < best ||
        (wer == best && beta < search.best_beta)) {
      best = wer;
      search.best_beta = beta;
    }
  }
  return search;
}

}  // namespace cflm
