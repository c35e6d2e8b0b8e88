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

#include "cflm/align.h"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace cflm {
namespace {

int count_kind(const EditScript& s, EditKind kind) {
  return static_cast<int>(std::count_if(
      s.ops.begin(), s.ops.end(),
      [kind](const EditOp& op) { return op.kind == kind; }));
}

}  // namespace

int EditScript::substitutions() const {
  return count_kind(*this, EditKind::kSubstitute);
}
int EditScript::deletions() const { return count_kind(*this, EditKind::kDelete); }
int EditScript::insertions() const {
  return count_kind(*this, EditKind::kInsert);
}
int EditScript::matches() const { return count_kind(*this, EditKind::kMatch); }

EditScript edit_align(std::span<const TokenId> ref,
                      std::span<const TokenId> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<int> d((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) d[i * w] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i * w + j] =
          std::min({diag, d[(i - 1) * w + j] + 1, d[i * w + j - 1] + 1});
    }
  }

  EditScript script;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const int here = d[i * w + j];
    const int ii = static_cast<int>(i) - 1;
    const int jj = static_cast<int>(j) - 1;
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        d[(i - 1) * w + j - 1] == here) {
      script.ops.push_back({EditKind::kMatch, ii, jj});
      --i, --j;
    } else if (i > 0 && j > 0 && d[(i - 1) * w + j - 1] + 1 == here) {
      script.ops.push_back({EditKind::kSubstitute, ii, jj});
      --i, --j;
    } else if (i > 0 && d[(i - 1) * w + j] + 1 == here) {
      script.ops.push_back({EditKind::kDelete, ii, -1});
      --i;
    } else {
      script.ops.push_back({EditKind::kInsert, -1, jj});
      --j;
    }
  }
  std::reverse(script.ops.begin(), script.ops.end());
  return script;
}

EditScript edit_align(const WordSequence& reference,
                      const WordSequence& hypothesis) {
  return edit_align(std::span<const TokenId>(reference.words),
                    std::span<const TokenId>(hypothesis.words));
}

int edit_distance(std::span<const TokenId> ref, std::span<const TokenId> hyp) {
  std::vector<int> prev(hyp.size() + 1);
  std::vector<int> cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                         prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

std::vector<Label> expand_labels(std::span<const Label> word_labels,
                                 std::span<const Span> spans) {
  if (word_labels.size() != spans.size() + 1) {
    throw Error("expand_labels: " + std::to_string(word_labels.size()) +
                " labels for " + std::to_string(spans.size()) + " words");
  }
  std::vector<Label> out;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    out.insert(out.end(), static_cast<std::size_t>(spans[k].size()),
               word_labels[k]);
  }
  out.push_back(word_labels.back());
  return out;
}

AnnotatedPair annotate(const EditScript& script, const WordSequence& reference,
                       const WordSequence& hypothesis, AnnotationFlags flags,
                       const SubwordTokenizer* tokenizer) {
  const int n = static_cast<int>(reference.size());
  const int m = static_cast<int>(hypothesis.size());
  int next_ref = 0;
  int next_hyp = 0;
  for (const EditOp& op : script.ops) {
    const bool uses_ref = op.kind != EditKind::kInsert;
    const bool uses_hyp = op.kind != EditKind::kDelete;
    if ((uses_ref && op.ref != next_ref++) ||
        (uses_hyp && op.hyp != next_hyp++) || (!uses_ref && op.ref != -1) ||
        (!uses_hyp && op.hyp != -1)) {
      throw Error("annotate: script does not match reference/hypothesis");
    }
  }
  if (next_ref != n || next_hyp != m) {
    throw Error("annotate: script covers " + std::to_string(next_ref) + "/" +
                std::to_string(next_hyp) + " words of a " + std::to_string(n) +
                "/" + std::to_string(m) + " pair");
  }

  AnnotatedPair out;
  out.reference = reference;
  out.hypothesis = hypothesis;
  out.word_labels.assign(static_cast<std::size_t>(n) + 1, 0);
  bool pending_insertion = false;
  for (const EditOp& op : script.ops) {
    if (op.kind == EditKind::kInsert) {
      pending_insertion = pending_insertion || flags.annotate_insertions;
      continue;
    }
    Label& label = out.word_labels[op.ref];
    if (pending_insertion) {
      label = 1;
      pending_insertion = false;
    }
    if (op.kind == EditKind::kSubstitute ||
        (op.kind == EditKind::kDelete && flags.annotate_deletions)) {
      label = 1;
    }
  }
  if (pending_insertion) out.word_labels.back() = 1;
  if (tokenizer != nullptr) {
    out.token_labels = expand_labels(out.word_labels,
                                     tokenizer->tokenize(reference).word_spans);
  }
  return out;
}

std::vector<AnnotatedPair> annotate_corpus(const std::vector<RefHypPair>& pairs,
                                           AnnotationFlags flags,
                                           const SubwordTokenizer* tokenizer) {
  std::vector<AnnotatedPair> out;
  out.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    try {
      out.push_back(annotate(edit_align(pairs[k].reference, pairs[k].hypothesis),
                             pairs[k].reference, pairs[k].hypothesis, flags,
                             tokenizer));
    } catch (const Error& e) {
      throw Error("pair " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

void write_annotated_jsonl(const std::vector<AnnotatedPair>& pairs,
                           const Vocabulary& vocab,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const AnnotatedPair& p : pairs) {
    nlohmann::json obj;
    obj["ref"] = to_text(p.reference, vocab);
    obj["hyp"] = to_text(p.hypothesis, vocab);
    obj["word_labels"] = std::vector<int>(p.word_labels.begin(),
                                          p.word_labels.end() - 1);
    obj["eos_label"] = static_cast<int>(p.eos_label());
    out << obj.dump() << '\n';
  }
}

std::vector<AnnotatedPair> read_annotated_jsonl(
    const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<AnnotatedPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = " at line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error("malformed JSON" + where);
    }
    for (const char* field : {"ref", "hyp", "word_labels", "eos_label"}) {
      if (!obj.contains(field)) {
        throw Error(std::string("missing field '") + field + "'" + where);
      }
    }
    AnnotatedPair p;
    p.reference = encode(split_words(obj["ref"].get<std::string>()), vocab);
    p.hypothesis = encode(split_words(obj["hyp"].get<std::string>()), vocab);
    for (int v : obj["word_labels"].get<std::vector<int>>()) {
      if (v != 0 && v != 1) throw Error("labels must be 0 or 1" + where);
      p.word_labels.push_back(static_cast<Label>(v));
    }
    const int eos = obj["eos_label"].get<int>();
    if (eos != 0 && eos != 1) throw Error("labels must be 0 or 1" + where);
    p.word_labels.push_back(static_cast<Label>(eos));
    if (p.word_labels.size() != p.reference.size() + 1) {
      throw Error("label count does not match reference length" + where);
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace cflm
