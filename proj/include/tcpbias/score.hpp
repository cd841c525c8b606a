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

// Levenshtein word alignment and the error rates built on it.

#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tcpbias/common.hpp"

namespace tcpbias {

enum class EditOp { kMatch, kSub, kIns, kDel };

inline const char* edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::kMatch: return "match";
    case EditOp::kSub: return "sub";
    case EditOp::kIns: return "ins";
    case EditOp::kDel: return "del";
  }
  return "?";
}

struct AlignedPair {
  EditOp op;
  std::optional<std::string> ref;
  std::optional<std::string> hyp;
};

struct Alignment {
  std::string utt_id;
  std::vector<AlignedPair> ops;
  long matches = 0;
  long subs = 0;
  long ins = 0;
  long dels = 0;

  long ref_tokens() const { return matches + subs + dels; }
  long errors() const { return subs + ins + dels; }
};

/// Minimum edit distance alignment with unit costs. On the backtrace, equal
/// cost paths prefer MATCH, then SUB, then DEL, then INS.
inline Alignment align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                       std::string utt_id = {}) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::vector<long>> d(n + 1, std::vector<long>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const long diag = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }

  Alignment a;
  a.utt_id = std::move(utt_id);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      a.ops.push_back({EditOp::kMatch, ref[i - 1], hyp[j - 1]});
      ++a.matches;
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      a.ops.push_back({EditOp::kSub, ref[i - 1], hyp[j - 1]});
      ++a.subs;
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      a.ops.push_back({EditOp::kDel, ref[i - 1], std::nullopt});
      ++a.dels;
      --i;
    } else {
      a.ops.push_back({EditOp::kIns, std::nullopt, hyp[j - 1]});
      ++a.ins;
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

/// Errors over reference tokens. `rate` is empty when both counts are zero;
/// `infinite` flags errors against an empty denominator.
struct Rate {
  long errors = 0;
  long ref_tokens = 0;

  std::optional<double> rate() const {
    if (ref_tokens == 0) return std::nullopt;
    return static_cast<double>(errors) / static_cast<double>(ref_tokens);
  }
  bool infinite() const { return ref_tokens == 0 && errors > 0; }
};

inline Rate wer(const std::vector<Alignment>& alignments) {
  if (alignments.empty()) throw Error("wer: no utterances");
  Rate r;
  for (const auto& a : alignments) {
    r.errors += a.errors();
    r.ref_tokens += a.ref_tokens();
  }
  if (r.ref_tokens == 0) throw Error("wer: zero reference tokens");
  return r;
}

using WordPredicate = std::function<bool(const std::string&)>;

/// Restricted error rate: SUB/DEL whose reference word is in the class,
/// plus INS whose hypothesis word is in the class, over class reference
/// tokens.
inline Rate class_rate(const Alignment& a, const WordPredicate& in_class) {
  Rate r;
  for (const auto& p : a.ops) {
    switch (p.op) {
      case EditOp::kMatch:
        if (in_class(*p.ref)) ++r.ref_tokens;
        break;
      case EditOp::kSub:
      case EditOp::kDel:
        if (in_class(*p.ref)) {
          ++r.ref_tokens;
          ++r.errors;
        }
        break;
      case EditOp::kIns:
        if (in_class(*p.hyp)) ++r.errors;
        break;
    }
  }
  return r;
}

using WordSet = std::unordered_set<std::string>;

/// R-WER with one biasing list per utterance id.
inline Rate r_wer(const std::vector<Alignment>& alignments,
                  const std::unordered_map<std::string, WordSet>& lists) {
  Rate total;
  for (const auto& a : alignments) {
    auto it = lists.find(a.utt_id);
    if (it == lists.end()) throw Error("r_wer: no biasing list for utterance " + a.utt_id);
    const WordSet& list = it->second;
    const Rate r = class_rate(a, [&](const std::string& w) { return list.contains(w); });
    total.errors += r.errors;
    total.ref_tokens += r.ref_tokens;
  }
  return total;
}

/// Same formula over words outside the task-specific training set.
inline Rate oov_wer(const std::vector<Alignment>& alignments, const WordSet& oov_words) {
  Rate total;
  for (const auto& a : alignments) {
    const Rate r = class_rate(a, [&](const std::string& w) { return oov_words.contains(w); });
    total.errors += r.errors;
    total.ref_tokens += r.ref_tokens;
  }
  return total;
}

/// Lowercases ASCII and strips ASCII punctuation; words that become empty
/// are dropped. Not used unless explicitly requested.
inline std::vector<std::string> simple_normalize(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    std::string s;
    for (unsigned char c : w)
      if (!std::ispunct(c)) s += static_cast<char>(std::tolower(c));
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

struct UtteranceScore {
  std::string utt_id;
  Alignment alignment;
  Rate biased;
  Rate oov;
};

struct ScoreReport {
  Rate wer;
  std::optional<Rate> r_wer;
  std::optional<Rate> oov_wer;
  std::vector<UtteranceScore> utterances;
};

/// Aligns references against hypotheses (both keyed by utterance order) and
/// fills every rate that has inputs.
inline ScoreReport score_corpus(
    const std::vector<std::string>& ids, const std::vector<std::vector<std::string>>& refs,
    const std::vector<std::vector<std::string>>& hyps,
    const std::unordered_map<std::string, WordSet>* lists, const WordSet* oov_words) {
  if (ids.size() != refs.size() || refs.size() != hyps.size())
    throw Error("score: mismatched reference/hypothesis counts");
  ScoreReport report;
  std::vector<Alignment> aligns;
  aligns.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) aligns.push_back(align(refs[i], hyps[i], ids[i]));
  report.wer = wer(aligns);
  if (lists) report.r_wer = r_wer(aligns, *lists);
  if (oov_words) report.oov_wer = oov_wer(aligns, *oov_words);
  for (auto& a : aligns) {
    UtteranceScore u;
    u.utt_id = a.utt_id;
    if (lists) {
      const WordSet& l = lists->at(a.utt_id);
      u.biased = class_rate(a, [&](const std::string& w) { return l.contains(w); });
    }
    if (oov_words)
      u.oov = class_rate(a, [&](const std::string& w) { return oov_words->contains(w); });
    u.alignment = std::move(a);
    report.utterances.push_back(std::move(u));
  }
  return report;
}

}  // namespace tcpbias
