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
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tcpbias/basemodel.hpp"
#include "tcpbias/common.hpp"
#include "tcpbias/tcpgen.hpp"
#include "tcpbias/textproc.hpp"
#include "tcpbias/trie.hpp"

namespace tcpbias {

struct Hypothesis {
  std::vector<PieceId> pieces;  // ends with EOS once finished
  double logp = 0.0;
  TrieCursor cursor;
  bool finished = false;
  std::vector<double> gen_trace;
  BaseState state;
};

struct NBestList {
  std::string utt_id;
  std::vector<Hypothesis> hyps;  // logp descending, then piece sequence
  int beam = 0;
  int nbest = 0;
};

struct DecodeOptions {
  int beam = 10;
  int nbest = 10;
  int max_len = 64;
  bool trace_gen = false;
  StepOptions step;
};

/// Optional biasing head for a decode: parameters plus the utterance's tree.
struct Biasing {
  const TcpgenParams* params = nullptr;
  const PrefixTree* tree = nullptr;

  bool active() const { return params != nullptr && tree != nullptr; }
};

namespace detail {

struct Expansion {
  Vector dist;
  double p_gen = 0.0;
  BaseState next;
};

inline Expansion expand(const BaseModel& base, const Biasing& biasing, const Hypothesis& h,
                        const StepOptions& opts) {
  const Vocab& vocab = base.vocab();
  const PieceId prev = h.pieces.empty() ? vocab.bos() : h.pieces.back();
  BaseStepResult r = base.step(h.state, prev);
  Expansion e;
  e.next = std::move(r.next);
  if (!biasing.active()) {
    e.dist = std::move(r.p_mdl);
    return e;
  }
  const auto valid = valid_set(*biasing.tree, vocab, h.cursor, opts.ool_enabled);
  StepOutput s = tcpgen_step(*biasing.params, r.h_dec, valid, base.embeddings(), r.p_mdl,
                             vocab.ool(), opts);
  e.dist = std::move(s.p_final);
  e.p_gen = s.p_gen;
  return e;
}

inline bool hyp_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return a.pieces < b.pieces;
}

}  // namespace detail

/// Beam search over the (optionally biased) per-step distribution. Scores
/// are raw log-probability sums. At every step the best `beam` extensions
/// over all live hypotheses survive; those ending in EOS are set aside. The
/// search stops once `beam` hypotheses have finished and no live one can
/// still reach the N-best; at max_len the only extension is EOS, scored with
/// its actual probability.
inline NBestList beam_search(const BaseModel& base, const Biasing& biasing,
                             const Utterance& utt, const DecodeOptions& opts) {
  const Vocab& vocab = base.vocab();
  if (vocab.size() <= 3) throw Error("beam_search: empty vocabulary");
  if (opts.beam <= 0) throw Error("beam_search: zero beam");
  if (opts.nbest <= 0 || opts.nbest > opts.beam)
    throw Error("beam_search: nbest must lie in [1, beam]");
  if (opts.max_len < 1) throw Error("beam_search: max_len must be at least 1");

  const PieceId eos = vocab.eos();
  std::vector<Hypothesis> live(1);
  live[0].state = base.init_state(utt);
  std::vector<Hypothesis> finished;

  struct Candidate {
    int parent;
    PieceId piece;
    double score;
  };

  for (int step = 0; step < opts.max_len && !live.empty(); ++step) {
    const bool last = step == opts.max_len - 1;
    std::vector<detail::Expansion> expansions;
    expansions.reserve(live.size());
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      expansions.push_back(detail::expand(base, biasing, live[h], opts.step));
      const Vector& dist = expansions.back().dist;
      auto push = [&](PieceId y) {
        if (dist[y] > 0.0)
          cands.push_back({static_cast<int>(h), y, live[h].logp + std::log(dist[y])});
      };
      if (last) {
        push(eos);
      } else {
        for (PieceId y = 0; y < vocab.size(); ++y)
          if (y != vocab.bos() && y != vocab.ool()) push(y);
      }
    }

    auto before = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& pa = live[a.parent].pieces;
      const auto& pb = live[b.parent].pieces;
      if (pa != pb) return pa < pb;
      return a.piece < b.piece;
    };
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(opts.beam));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), before);
    cands.resize(keep);

    std::vector<Hypothesis> next;
    for (const Candidate& c : cands) {
      const Hypothesis& parent = live[c.parent];
      Hypothesis h;
      h.pieces = parent.pieces;
      h.pieces.push_back(c.piece);
      h.logp = c.score;
      h.gen_trace = parent.gen_trace;
      if (opts.trace_gen) h.gen_trace.push_back(expansions[c.parent].p_gen);
      h.state = expansions[c.parent].next;
      if (c.piece == eos) {
        h.cursor = parent.cursor;
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.cursor = biasing.tree ? advance(*biasing.tree, vocab, parent.cursor, c.piece)
                                : parent.cursor;
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (static_cast<int>(finished.size()) >= opts.beam) {
      // Scores only fall as pieces are appended, so a live hypothesis at or
      // below the nbest-th finished score can no longer enter the output.
      std::sort(finished.begin(), finished.end(), detail::hyp_before);
      const double bar = finished[static_cast<std::size_t>(opts.nbest) - 1].logp;
      bool open = false;
      for (const auto& h : live) open = open || h.logp > bar;
      if (!open) break;
    }
  }

  std::sort(finished.begin(), finished.end(), detail::hyp_before);
  if (static_cast<int>(finished.size()) > opts.nbest)
    finished.resize(static_cast<std::size_t>(opts.nbest));
  NBestList out;
  out.utt_id = utt.id;
  out.hyps = std::move(finished);
  out.beam = opts.beam;
  out.nbest = opts.nbest;
  return out;
}

/// Argmax decoding (smallest id on ties), EOS forced at max_len.
inline Hypothesis greedy_decode(const BaseModel& base, const Biasing& biasing,
                                const Utterance& utt, const DecodeOptions& opts) {
  const Vocab& vocab = base.vocab();
  Hypothesis h;
  h.state = base.init_state(utt);
  for (int step = 0; step < opts.max_len; ++step) {
    detail::Expansion e = detail::expand(base, biasing, h, opts.step);
    PieceId best = vocab.eos();
    if (step < opts.max_len - 1) {
      double best_p = -1.0;
      for (PieceId y = 0; y < vocab.size(); ++y) {
        if (y == vocab.bos() || y == vocab.ool()) continue;
        if (e.dist[y] > best_p) {
          best_p = e.dist[y];
          best = y;
        }
      }
    }
    h.logp += std::log(e.dist[best]);
    if (opts.trace_gen) h.gen_trace.push_back(e.p_gen);
    h.pieces.push_back(best);
    h.state = std::move(e.next);
    if (best == vocab.eos()) {
      h.finished = true;
      break;
    }
    if (biasing.tree) h.cursor = advance(*biasing.tree, vocab, h.cursor, best);
  }
  return h;
}

inline std::vector<std::string> hypothesis_words(const Vocab& vocab, const Hypothesis& h) {
  return detokenize(vocab, h.pieces);
}

}  // namespace tcpbias
