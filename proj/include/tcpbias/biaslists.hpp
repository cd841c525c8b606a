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

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tcpbias/common.hpp"
#include "tcpbias/score.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias {

enum class ListProvenance { kRareSim, kErrorBased, kOntology, kFrequency };

inline const char* provenance_name(ListProvenance p) {
  switch (p) {
    case ListProvenance::kRareSim: return "rare-sim";
    case ListProvenance::kErrorBased: return "error-based";
    case ListProvenance::kOntology: return "ontology";
    case ListProvenance::kFrequency: return "frequency";
  }
  return "?";
}

struct BiasingList {
  std::string utt_id;  // "global" for whole-task lists
  std::vector<std::string> words;
  ListProvenance provenance = ListProvenance::kRareSim;
  std::size_t num_hits = 0;  // leading reference hits; the rest are distractors
};

/// Everything except the `top_k` most frequent words (count descending,
/// ties broken lexicographically). Returned sorted.
inline std::vector<std::string> full_rare_list(const WordCounts& freqs, std::size_t top_k) {
  const auto ranked = rank_words(freqs);
  std::vector<std::string> out;
  for (std::size_t i = top_k; i < ranked.size(); ++i) out.push_back(ranked[i].first);
  std::sort(out.begin(), out.end());
  return out;
}

/// Words seen fewer than `max_count` times; the frequency-based comparison arm.
inline std::vector<std::string> frequency_list(const WordCounts& freqs, long max_count) {
  std::vector<std::string> out;
  for (const auto& [w, c] : freqs)
    if (c < max_count) out.push_back(w);
  std::sort(out.begin(), out.end());
  return out;
}

/// A full list with a word index, so per-utterance sampling can work on
/// positions instead of copying strings.
class IndexedList {
 public:
  IndexedList() = default;
  explicit IndexedList(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (!index_.emplace(words_[i], i).second)
        throw Error("biasing list: duplicate word " + words_[i]);
  }

  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  std::optional<std::size_t> find(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Indices of the reference hits (first-occurrence order) followed by
/// `n_distractors` indices drawn uniformly without replacement from the rest.
inline std::vector<std::size_t> sample_list_indices(const std::vector<std::string>& ref_words,
                                                    const IndexedList& full,
                                                    std::size_t n_distractors,
                                                    std::uint64_t seed) {
  std::vector<std::size_t> out;
  std::vector<char> taken(full.size(), 0);
  for (const auto& w : ref_words)
    if (auto i = full.find(w); i && !taken[*i]) {
      taken[*i] = 1;
      out.push_back(*i);
    }
  const std::size_t pool_size = full.size() - out.size();
  if (n_distractors > pool_size)
    throw Error("biasing list: " + std::to_string(n_distractors) +
                " distractors requested, pool has " + std::to_string(pool_size));
  if (n_distractors == 0) return out;
  std::vector<std::size_t> pool;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < full.size(); ++i)
    if (!taken[i]) pool.push_back(i);
  SplitMix64 rng(seed);
  for (std::size_t k = 0; k < n_distractors; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
    std::swap(pool[k], pool[j]);
    out.push_back(pool[k]);
  }
  return out;
}

/// Reference words that are in the full list, plus seeded distractors.
inline BiasingList utterance_list(const std::string& utt_id,
                                  const std::vector<std::string>& ref_words,
                                  const IndexedList& full, std::size_t n_distractors,
                                  std::uint64_t seed) {
  BiasingList list;
  list.utt_id = utt_id;
  list.provenance = ListProvenance::kRareSim;
  const auto idx = sample_list_indices(ref_words, full, n_distractors, seed);
  for (std::size_t i : idx) list.words.push_back(full.words()[i]);
  list.num_hits = idx.size() - n_distractors;
  return list;
}

/// Per-utterance seed for test-time list sampling.
inline std::uint64_t list_seed(std::uint64_t seed, const std::string& utt_id) {
  return derive_seed(seed, fnv1a(utt_id));
}

/// Distinct reference words whose error rate (substitutions + deletions over
/// occurrences) is strictly above the corpus micro-average WER. Insertions
/// count toward the average but are not attributed to any word.
inline std::vector<std::string> error_based_list(const std::vector<Alignment>& alignments) {
  if (alignments.empty()) throw Error("error-based list: no decoded utterances");
  std::map<std::string, std::pair<long, long>> per_word;  // errors, occurrences
  long total_errors = 0, total_ref = 0;
  for (const auto& a : alignments) {
    total_errors += a.errors();
    total_ref += a.ref_tokens();
    for (const auto& p : a.ops) {
      if (!p.ref) continue;
      auto& [err, occ] = per_word[*p.ref];
      ++occ;
      if (p.op != EditOp::kMatch) ++err;
    }
  }
  if (total_ref == 0) throw Error("error-based list: no reference tokens");
  std::vector<std::string> out;
  for (const auto& [w, eo] : per_word) {
    // err/occ > total_errors/total_ref without floating point
    if (eo.first * total_ref > total_errors * eo.second) out.push_back(w);
  }
  return out;
}

}  // namespace tcpbias
