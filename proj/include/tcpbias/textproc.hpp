// Copyright 2026 The tcpbias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Wordpiece vocabulary with a word-start marker, BPE-style merge learning,
// greedy tokenization and a few corpus utilities.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tcpbias/common.hpp"

namespace tcpbias {

inline constexpr std::string_view kWordStart = "_";
inline constexpr std::string_view kBosSpelling = "<bos>";
inline constexpr std::string_view kEosSpelling = "<eos>";
inline constexpr std::string_view kOolSpelling = "<ool>";
inline constexpr int kDefaultEmbeddingDim = 64;

/// Splits a UTF-8 string into code points. Malformed lead bytes are kept
/// as single-byte characters.
inline std::vector<std::string> split_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xf0)
      len = 4;
    else if (c >= 0xe0)
      len = 3;
    else if (c >= 0xc0)
      len = 2;
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

/// Dense wordpiece inventory. Ids 0..num_pieces()-1 are ordinary pieces,
/// followed by BOS, EOS and OOL.
class Vocab {
 public:
  Vocab() = default;

  explicit Vocab(std::vector<std::string> pieces,
                 int d_emb = kDefaultEmbeddingDim)
      : pieces_(std::move(pieces)), d_emb_(d_emb) {
    if (d_emb_ <= 0) throw Error("vocab: embedding dimension must be positive");
    const std::size_t n = pieces_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& p = pieces_[i];
      if (p.empty()) throw Error("vocab: empty piece at line " + std::to_string(i));
      if (p == kBosSpelling || p == kEosSpelling || p == kOolSpelling)
        throw Error("vocab: reserved spelling used as a piece: " + p);
      if (p == kWordStart)
        throw Error("vocab: bare word-start marker is not a piece");
      if (p.size() > 1 && p.find(kWordStart, 1) != std::string::npos)
        throw Error("vocab: marker inside piece: " + p);
      if (!index_.emplace(p, static_cast<PieceId>(i)).second)
        throw Error("vocab: duplicate piece: " + p);
      max_chars_ = std::max(max_chars_, split_chars(p).size());
    }
    pieces_.emplace_back(kBosSpelling);
    pieces_.emplace_back(kEosSpelling);
    pieces_.emplace_back(kOolSpelling);
  }

  int size() const { return static_cast<int>(pieces_.size()); }
  int num_pieces() const { return size() - 3; }
  int d_emb() const { return d_emb_; }

  PieceId bos() const { return size() - 3; }
  PieceId eos() const { return size() - 2; }
  PieceId ool() const { return size() - 1; }

  bool is_special(PieceId id) const { return id >= bos(); }
  bool is_word_initial(PieceId id) const {
    return !is_special(id) && pieces_[id].starts_with(kWordStart);
  }
  bool is_continuation(PieceId id) const {
    return !is_special(id) && !pieces_[id].starts_with(kWordStart);
  }

  const std::string& piece(PieceId id) const { return pieces_.at(id); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  std::optional<PieceId> find(std::string_view piece) const {
    auto it = index_.find(std::string(piece));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Longest piece length in code points, marker included.
  std::size_t max_piece_chars() const { return max_chars_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, PieceId> index_;
  std::size_t max_chars_ = 0;
  int d_emb_ = kDefaultEmbeddingDim;
};

struct Utterance {
  std::string id;
  std::vector<std::string> words;
};

struct Corpus {
  std::vector<Utterance> utterances;
  std::string split;

  bool empty() const { return utterances.empty(); }
  std::size_t size() const { return utterances.size(); }

  void validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& u : utterances) {
      if (!ids.insert(u.id).second)
        throw Error("corpus: duplicate utterance id " + u.id);
      if (u.words.empty()) throw Error("corpus: empty reference for " + u.id);
    }
  }
};

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

namespace detail {

inline void check_word(std::string_view word) {
  if (word.empty()) throw Error("unencodable: empty word");
  if (word.find(kWordStart) != std::string_view::npos)
    throw Error("unencodable: word contains the word-start marker: " +
                std::string(word));
}

inline std::vector<std::string> initial_symbols(std::string_view word) {
  auto chars = split_chars(word);
  chars.front().insert(0, kWordStart);
  return chars;
}

}  // namespace detail

/// Learns a wordpiece inventory by BPE merging. Seeds with every character
/// seen (marked when word-initial), then repeatedly merges the most frequent
/// adjacent pair; ties go to the lexicographically smallest merged string.
inline Vocab build_vocab(const Corpus& corpus, int target_size,
                         int d_emb = kDefaultEmbeddingDim) {
  if (corpus.empty()) throw Error("empty corpus");

  std::map<std::string, long> type_counts;
  for (const auto& u : corpus.utterances)
    for (const auto& w : u.words) {
      detail::check_word(w);
      ++type_counts[w];
    }
  if (type_counts.empty()) throw Error("empty corpus");

  // Symbols are interned so pair counting works on integer keys.
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = ids.emplace(s, static_cast<int>(names.size()));
    if (inserted) names.push_back(s);
    return it->second;
  };

  struct Type {
    std::vector<int> symbols;
    long count;
  };
  std::vector<Type> types;
  std::set<std::string> seed;
  for (const auto& [w, c] : type_counts) {
    Type t{{}, c};
    for (const auto& sym : detail::initial_symbols(w)) {
      seed.insert(sym);
      t.symbols.push_back(intern(sym));
    }
    types.push_back(std::move(t));
  }
  if (target_size < static_cast<int>(seed.size()))
    throw Error("target size " + std::to_string(target_size) +
                " below character inventory " + std::to_string(seed.size()));

  std::vector<std::string> pieces(seed.begin(), seed.end());
  std::unordered_set<std::string> known(seed.begin(), seed.end());

  auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };

  while (static_cast<int>(pieces.size()) < target_size) {
    std::unordered_map<std::uint64_t, long> pairs;
    for (const auto& t : types)
      for (std::size_t i = 0; i + 1 < t.symbols.size(); ++i)
        pairs[key(t.symbols[i], t.symbols[i + 1])] += t.count;

    bool found = false;
    int best_left = 0, best_right = 0;
    long best_count = 0;
    std::string best_merged;
    for (const auto& [k, count] : pairs) {
      if (found && count < best_count) continue;
      const int left = static_cast<int>(k >> 32);
      const int right = static_cast<int>(k & 0xffffffffULL);
      std::string merged = names[left] + names[right];
      if (known.contains(merged)) continue;
      const bool better =
          !found || count > best_count ||
          (count == best_count &&
           (merged < best_merged ||
            (merged == best_merged && names[left] < names[best_left])));
      if (better) {
        found = true;
        best_left = left;
        best_right = right;
        best_count = count;
        best_merged = std::move(merged);
      }
    }
    if (!found) break;  // every word is a single symbol already

    const int merged_id = intern(best_merged);
    for (auto& t : types) {
      auto& sym = t.symbols;
      std::size_t out = 0;
      for (std::size_t i = 0; i < sym.size(); ++i) {
        if (i + 1 < sym.size() && sym[i] == best_left && sym[i + 1] == best_right) {
          sym[out++] = merged_id;
          ++i;
        } else {
          sym[out++] = sym[i];
        }
      }
      sym.resize(out);
    }
    known.insert(best_merged);
    pieces.push_back(best_merged);
  }
  return Vocab(std::move(pieces), d_emb);
}

/// Greedy longest-match segmentation. The first piece is always
/// word-initial, the rest are continuation pieces.
inline std::vector<PieceId> tokenize(const Vocab& vocab, std::string_view word) {
  detail::check_word(word);
  const auto chars = split_chars(word);
  std::vector<PieceId> out;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    std::optional<PieceId> hit;
    std::size_t hit_len = 0;
    for (std::size_t len = std::min(vocab.max_piece_chars(), chars.size() - pos);
         len >= 1; --len) {
      std::string candidate = pos == 0 ? std::string(kWordStart) : std::string();
      for (std::size_t k = 0; k < len; ++k) candidate += chars[pos + k];
      if (auto id = vocab.find(candidate)) {
        hit = id;
        hit_len = len;
        break;
      }
    }
    if (!hit) throw Error("unencodable: " + std::string(word));
    out.push_back(*hit);
    pos += hit_len;
  }
  return out;
}

/// Joins pieces back into words; a word-initial piece opens a new word.
/// Specials are skipped.
inline std::vector<std::string> detokenize(const Vocab& vocab,
                                           const std::vector<PieceId>& pieces) {
  std::vector<std::string> words;
  for (PieceId id : pieces) {
    if (id < 0 || id >= vocab.size()) throw Error("detokenize: id out of range");
    if (vocab.is_special(id)) continue;
    const std::string& p = vocab.piece(id);
    if (vocab.is_word_initial(id) || words.empty()) {
      words.push_back(vocab.is_word_initial(id) ? p.substr(kWordStart.size()) : p);
    } else {
      words.back() += p;
    }
  }
  return words;
}

inline std::string capitalize_first(std::string_view word) {
  std::string out(word);
  if (!out.empty())
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

/// Adds a first-letter-capitalized copy of every word. Order is preserved
/// (each copy follows its source) and duplicates are dropped.
inline std::vector<std::string> augment_case(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& w : words) {
    if (seen.insert(w).second) out.push_back(w);
    std::string cap = capitalize_first(w);
    if (seen.insert(cap).second) out.push_back(std::move(cap));
  }
  return out;
}

using WordCounts = std::unordered_map<std::string, long>;

inline WordCounts word_freq(const Corpus& corpus) {
  WordCounts counts;
  for (const auto& u : corpus.utterances)
    for (const auto& w : u.words) ++counts[w];
  return counts;
}

/// Descending count, then lexicographic.
inline std::vector<std::pair<std::string, long>> rank_words(const WordCounts& counts) {
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

}  // namespace tcpbias
