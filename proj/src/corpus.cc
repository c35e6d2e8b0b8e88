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

#include "cflm/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace cflm {
namespace {

bool is_reserved(std::string_view token) {
  return token == kBosToken || token == kEosToken || token == kUnkToken;
}

}  // namespace

Vocabulary::Vocabulary()
    : tokens_{std::string(kBosToken), std::string(kEosToken),
              std::string(kUnkToken)} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary vocab;
  for (const std::string& t : tokens) {
    if (is_reserved(t)) continue;
    if (t.empty()) throw Error("vocabulary: empty token");
    if (!vocab.index_.emplace(t, static_cast<TokenId>(vocab.tokens_.size()))
             .second) {
      throw Error("vocabulary: duplicate token '" + t + "'");
    }
    vocab.tokens_.push_back(t);
  }
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  if (tokens.size() < kNumReserved || tokens[0] != kBosToken ||
      tokens[1] != kEosToken || tokens[2] != kUnkToken) {
    throw Error("vocabulary file " + path.string() +
                " does not start with the reserved tokens");
  }
  return from_tokens(tokens);
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            int min_count) {
  if (corpus.empty()) throw Error("empty corpus");
  if (min_count < 1) throw Error("min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& sentence : corpus) {
    for (const std::string& w : sentence) {
      if (!is_reserved(w)) ++counts[w];
    }
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [word, count] : counts) {
    if (count >= min_count) kept.emplace_back(word, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [word, count] : kept) tokens.push_back(word);
  return Vocabulary::from_tokens(tokens);
}

std::string_view to_string(SourceTag tag) {
  return tag == SourceTag::kGenerated ? "generated" : "real";
}

SourceTag parse_source_tag(std::string_view text) {
  if (text == "real") return SourceTag::kReal;
  if (text == "generated") return SourceTag::kGenerated;
  throw Error("unknown source tag '" + std::string(text) + "'");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

WordSequence encode(const std::vector<std::string>& words,
                    const Vocabulary& vocab, SourceTag tag) {
  WordSequence seq;
  seq.tag = tag;
  seq.words.reserve(words.size());
  for (const std::string& w : words) seq.words.push_back(vocab.id(w));
  return seq;
}

WordSequence encode(const TextRecord& record, const Vocabulary& vocab) {
  return encode(record.words, vocab, record.tag);
}

std::vector<std::string> decode(const WordSequence& seq,
                                const Vocabulary& vocab) {
  std::vector<std::string> words;
  words.reserve(seq.size());
  for (TokenId id : seq.words) words.push_back(vocab.token(id));
  return words;
}

std::string to_text(const WordSequence& seq, const Vocabulary& vocab) {
  return join_words(decode(seq, vocab));
}

std::vector<std::string> chunk_word(std::string_view word, int chunk_len) {
  if (chunk_len < 1) throw Error("chunk_len must be >= 1");
  std::vector<std::string> pieces;
  for (std::size_t i = 0; i < word.size(); i += chunk_len) {
    pieces.emplace_back(word.substr(i, chunk_len));
  }
  return pieces;
}

SubwordTokenizer::SubwordTokenizer(const Vocabulary& words, int chunk_len)
    : words_(words), chunk_len_(chunk_len) {
  if (chunk_len < 1) throw Error("chunk_len must be >= 1");
  std::set<std::string> chunks;
  for (std::size_t id = kNumReserved; id < words.size(); ++id) {
    for (auto& piece : chunk_word(words.token(static_cast<TokenId>(id)),
                                  chunk_len)) {
      chunks.insert(std::move(piece));
    }
  }
  subwords_ = Vocabulary::from_tokens({chunks.begin(), chunks.end()});
  pieces_.resize(words.size());
  for (TokenId r = 0; r < kNumReserved; ++r) pieces_[r] = {r};
  for (std::size_t id = kNumReserved; id < words.size(); ++id) {
    for (const auto& piece :
         chunk_word(words.token(static_cast<TokenId>(id)), chunk_len)) {
      pieces_[id].push_back(subwords_.id(piece));
    }
  }
}

TokenizedSequence SubwordTokenizer::tokenize(const WordSequence& seq) const {
  TokenizedSequence out;
  out.word_spans.reserve(seq.size());
  for (TokenId w : seq.words) {
    if (w < 0 || static_cast<std::size_t>(w) >= pieces_.size()) {
      throw Error("tokenize: word id " + std::to_string(w) + " out of range");
    }
    Span span{static_cast<int>(out.tokens.size()), 0};
    out.tokens.insert(out.tokens.end(), pieces_[w].begin(), pieces_[w].end());
    span.end = static_cast<int>(out.tokens.size());
    out.word_spans.push_back(span);
  }
  return out;
}

WordSequence SubwordTokenizer::detokenize(const TokenizedSequence& seq) const {
  WordSequence out;
  int expected = 0;
  for (const Span& span : seq.word_spans) {
    if (span.begin != expected || span.end <= span.begin ||
        span.end > static_cast<int>(seq.tokens.size())) {
      throw Error("detokenize: spans do not partition the tokens");
    }
    std::string surface;
    for (int i = span.begin; i < span.end; ++i) {
      surface += subwords_.token(seq.tokens[i]);
    }
    if (!words_.contains(surface)) {
      throw Error("detokenize: '" + surface + "' is not a vocabulary word");
    }
    out.words.push_back(words_.id(surface));
    expected = span.end;
  }
  if (expected != static_cast<int>(seq.tokens.size())) {
    throw Error("detokenize: trailing tokens outside any span");
  }
  return out;
}

TokenizedSequence tokenize_subwords(const WordSequence& seq,
                                    const Vocabulary& vocab, int chunk_len) {
  return SubwordTokenizer(vocab, chunk_len).tokenize(seq);
}

TokenizedSequence word_level(const WordSequence& seq) {
  TokenizedSequence out;
  out.tokens = seq.words;
  for (int i = 0; i < static_cast<int>(seq.size()); ++i) {
    out.word_spans.push_back(Span{i, i + 1});
  }
  return out;
}

std::vector<TextRecord> read_text_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<TextRecord> records;
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
    if (!obj.is_object() || !obj.contains("text")) {
      throw Error("missing field 'text'" + where);
    }
    if (!obj["text"].is_string()) throw Error("field 'text' not a string" + where);
    TextRecord rec;
    rec.words = split_words(obj["text"].get<std::string>());
    if (obj.contains("tag")) {
      if (!obj["tag"].is_string()) throw Error("field 'tag' not a string" + where);
      try {
        rec.tag = parse_source_tag(obj["tag"].get<std::string>());
      } catch (const Error& e) {
        throw Error(e.what() + where);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_text_jsonl(const std::vector<TextRecord>& records,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const TextRecord& rec : records) {
    nlohmann::json obj;
    obj["text"] = join_words(rec.words);
    obj["tag"] = to_string(rec.tag);
    out << obj.dump() << '\n';
  }
}

std::vector<WordSequence> read_corpus_jsonl(const std::filesystem::path& path,
                                            const Vocabulary& vocab) {
  std::vector<WordSequence> corpus;
  for (const TextRecord& rec : read_text_jsonl(path)) {
    corpus.push_back(encode(rec, vocab));
  }
  return corpus;
}

void write_corpus_jsonl(const std::vector<WordSequence>& corpus,
                        const Vocabulary& vocab,
                        const std::filesystem::path& path) {
  std::vector<TextRecord> records;
  records.reserve(corpus.size());
  for (const WordSequence& seq : corpus) {
    records.push_back(TextRecord{decode(seq, vocab), seq.tag});
  }
  write_text_jsonl(records, path);
}

void check_scored(const ScoredSequence& seq) {
  if (seq.word_scores.size() != seq.words.size() + 1) {
    throw Error("scored sequence: " + std::to_string(seq.word_scores.size()) +
                " scores for " + std::to_string(seq.words.size()) + " words");
  }
  for (double s : seq.word_scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error("scored sequence: score " + std::to_string(s) +
                  " outside [0, 1]");
    }
  }
}

ScoredSequence unscored(const WordSequence& seq) {
  return ScoredSequence{seq, std::vector<double>(seq.size() + 1, 0.0)};
}

std::vector<ScoredSequence> read_scored_jsonl(const std::filesystem::path& path,
                                              const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<ScoredSequence> corpus;
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
    for (const char* field : {"text", "word_scores", "eos_score"}) {
      if (!obj.is_object() || !obj.contains(field)) {
        throw Error(std::string("missing field '") + field + "'" + where);
      }
    }
    ScoredSequence seq;
    try {
      seq.words = encode(split_words(obj["text"].get<std::string>()), vocab);
      if (obj.contains("tag")) {
        seq.words.tag = parse_source_tag(obj["tag"].get<std::string>());
      }
      seq.word_scores = obj["word_scores"].get<std::vector<double>>();
      seq.word_scores.push_back(obj["eos_score"].get<double>());
      check_scored(seq);
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string(e.what()) + where);
    } catch (const Error& e) {
      throw Error(e.what() + where);
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

void write_scored_jsonl(const std::vector<ScoredSequence>& corpus,
                        const Vocabulary& vocab,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const ScoredSequence& seq : corpus) {
    check_scored(seq);
    nlohmann::json obj;
    obj["text"] = to_text(seq.words, vocab);
    obj["word_scores"] = std::vector<double>(seq.word_scores.begin(),
                                             seq.word_scores.end() - 1);
    obj["eos_score"] = seq.eos_score();
    obj["tag"] = to_string(seq.words.tag);
    out << obj.dump() << '\n';
  }
}

}  // namespace cflm
