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

// Vocabularies, word and subword sequences, and JSONL corpus I/O.

#ifndef CFLM_CORPUS_H_
#define CFLM_CORPUS_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cflm/common.h"

namespace cflm {

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr int kNumReserved = 3;
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Dense id <-> string map. Ids 0..2 are always <bos>, <eos>, <unk>.
class Vocabulary {
 public:
  Vocabulary();

  // Reserved tokens are prepended when absent; throws on duplicates.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  // <unk> for unknown strings.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Words with count >= min_count, by descending count then lexicographically.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            int min_count);

enum class SourceTag { kReal, kGenerated };

std::string_view to_string(SourceTag tag);
SourceTag parse_source_tag(std::string_view text);

// Word ids of one sentence, without <bos>/<eos>.
struct WordSequence {
  std::vector<TokenId> words;
  SourceTag tag = SourceTag::kReal;

  std::size_t size() const { return words.size(); }
  bool empty() const { return words.empty(); }
  bool operator==(const WordSequence&) const = default;
};

// Surface form of a sentence before vocabulary lookup.
struct TextRecord {
  std::vector<std::string> words;
  SourceTag tag = SourceTag::kReal;

  bool operator==(const TextRecord&) const = default;
};

std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words);

WordSequence encode(const std::vector<std::string>& words,
                    const Vocabulary& vocab,
                    SourceTag tag = SourceTag::kReal);
WordSequence encode(const TextRecord& record, const Vocabulary& vocab);
std::vector<std::string> decode(const WordSequence& seq,
                                const Vocabulary& vocab);
std::string to_text(const WordSequence& seq, const Vocabulary& vocab);

// Half-open token range [begin, end) covered by one word.
struct Span {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct TokenizedSequence {
  std::vector<TokenId> tokens;
  std::vector<Span> word_spans;
};

// Consecutive chunks of chunk_len bytes; the last may be shorter.
std::vector<std::string> chunk_word(std::string_view word, int chunk_len);

// Fixed-length character chunking over a word vocabulary. The subword
// vocabulary holds every chunk of every word, sorted, after the reserved
// tokens; reserved words map to their same-named subword.
class SubwordTokenizer {
 public:
  SubwordTokenizer(const Vocabulary& words, int chunk_len);

  TokenizedSequence tokenize(const WordSequence& seq) const;
  // Inverse of tokenize for sequences it produced. Throws on spans that
  // do not spell a vocabulary word.
  WordSequence detokenize(const TokenizedSequence& seq) const;

  const Vocabulary& words() const { return words_; }
  const Vocabulary& subwords() const { return subwords_; }
  int chunk_len() const { return chunk_len_; }

 private:
  Vocabulary words_;
  Vocabulary subwords_;
  int chunk_len_;
  std::vector<std::vector<TokenId>> pieces_;  // by word id
};

TokenizedSequence tokenize_subwords(const WordSequence& seq,
                                    const Vocabulary& vocab, int chunk_len);

// Identity tokenization: one token per word.
TokenizedSequence word_level(const WordSequence& seq);

// JSONL: {"text": "w1 w2 ...", "tag": "real"|"generated"}, tag optional.
std::vector<TextRecord> read_text_jsonl(const std::filesystem::path& path);
void write_text_jsonl(const std::vector<TextRecord>& records,
                      const std::filesystem::path& path);
std::vector<WordSequence> read_corpus_jsonl(const std::filesystem::path& path,
                                            const Vocabulary& vocab);
void write_corpus_jsonl(const std::vector<WordSequence>& corpus,
                        const Vocabulary& vocab,
                        const std::filesystem::path& path);

// Text with per-word fallibility scores in [0, 1]. word_scores has
// |words| + 1 entries; the last belongs to <eos>.
struct ScoredSequence {
  WordSequence words;
  std::vector<double> word_scores;

  double eos_score() const { return word_scores.back(); }
  bool operator==(const ScoredSequence&) const = default;
};

// Throws unless the score count and range are valid.
void check_scored(const ScoredSequence& seq);

// All-zero scores: a plain corpus seen as scored text.
ScoredSequence unscored(const WordSequence& seq);

// JSONL: {"text": "...", "word_scores": [...], "eos_score": s, "tag": ...}.
std::vector<ScoredSequence> read_scored_jsonl(const std::filesystem::path& path,
                                              const Vocabulary& vocab);
void write_scored_jsonl(const std::vector<ScoredSequence>& corpus,
                        const Vocabulary& vocab,
                        const std::filesystem::path& path);

}  // namespace cflm

#endif  // CFLM_CORPUS_H_
