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

// Levenshtein alignment of an ASR hypothesis against its reference and the
// per-word error annotation derived from it.

#ifndef CFLM_ALIGN_H_
#define CFLM_ALIGN_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cflm/corpus.h"

namespace cflm {

// Declared in backtrace preference order.
enum class EditKind : std::uint8_t { kMatch, kSubstitute, kDelete, kInsert };

struct EditOp {
  EditKind kind;
  int ref = -1;  // -1 for kInsert
  int hyp = -1;  // -1 for kDelete
  bool operator==(const EditOp&) const = default;
};

struct EditScript {
  std::vector<EditOp> ops;

  int substitutions() const;
  int deletions() const;
  int insertions() const;
  int matches() const;
  int cost() const { return substitutions() + deletions() + insertions(); }
};

// Minimal-cost script. Among optimal scripts the backtrace from the end
// prefers Match > Substitute > Delete > Insert at every step.
EditScript edit_align(std::span<const TokenId> reference,
                      std::span<const TokenId> hypothesis);
EditScript edit_align(const WordSequence& reference,
                      const WordSequence& hypothesis);

// Plain edit distance, no backtrace.
int edit_distance(std::span<const TokenId> reference,
                  std::span<const TokenId> hypothesis);

struct AnnotationFlags {
  bool annotate_deletions = true;
  bool annotate_insertions = true;
};

using Label = std::uint8_t;

struct AnnotatedPair {
  WordSequence reference;
  WordSequence hypothesis;
  // |reference| + 1 entries; the last is the <eos> slot.
  std::vector<Label> word_labels;
  // Per subword token of the reference (plus <eos>); empty unless a
  // tokenizer was supplied.
  std::vector<Label> token_labels;

  Label eos_label() const { return word_labels.back(); }
};

// Substitutions (and deletions, when enabled) label the victim word; an
// insertion (when enabled) labels the next reference word consumed after it
// in script order, or <eos> if none follows.
AnnotatedPair annotate(const EditScript& script, const WordSequence& reference,
                       const WordSequence& hypothesis, AnnotationFlags flags,
                       const SubwordTokenizer* tokenizer = nullptr);

// Copies each word label onto every token of its span; the <eos> label is
// appended as-is.
std::vector<Label> expand_labels(std::span<const Label> word_labels,
                                 std::span<const Span> spans);

struct RefHypPair {
  WordSequence reference;
  WordSequence hypothesis;
};

// edit_align + annotate per pair, order preserved.
std::vector<AnnotatedPair> annotate_corpus(
    const std::vector<RefHypPair>& pairs, AnnotationFlags flags,
    const SubwordTokenizer* tokenizer = nullptr);

// {"ref": ..., "hyp": ..., "word_labels": [...], "eos_label": 0|1}
void write_annotated_jsonl(const std::vector<AnnotatedPair>& pairs,
                           const Vocabulary& vocab,
                           const std::filesystem::path& path);
std::vector<AnnotatedPair> read_annotated_jsonl(
    const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace cflm

#endif  // CFLM_ALIGN_H_
