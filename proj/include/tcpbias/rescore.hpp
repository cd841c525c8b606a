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

// N-best re-ranking:
//   total = logp - lambda_ilm * log P_ilm(Y) + lambda_ext * log P_ext(Y)
// with a piece bigram as the external LM and the base model's zero-encoder
// path as the internal LM.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tcpbias/basemodel.hpp"
#include "tcpbias/common.hpp"
#include "tcpbias/decoder.hpp"
#include "tcpbias/score.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias {

/// Add-k smoothed piece bigram. Outcomes are every id except BOS and OOL;
/// contexts are BOS and every ordinary piece.
class ToyLM {
 public:
  ToyLM() = default;

  static ToyLM train(const Vocab& vocab, const std::vector<std::vector<PieceId>>& sequences,
                     double k = 0.1) {
    if (!(k > 0.0)) throw Error("toy LM: smoothing constant must be positive");
    const int V = vocab.size();
    Matrix counts = Matrix::Zero(V, V);
    for (const auto& seq : sequences) {
      PieceId prev = vocab.bos();
      for (PieceId p : seq) {
        if (p == vocab.bos() || p == vocab.ool()) throw Error("toy LM: special in sequence");
        counts(prev, p) += 1.0;
        if (p == vocab.eos()) break;
        prev = p;
      }
    }
    ToyLM lm;
    lm.bos_ = vocab.bos();
    lm.eos_ = vocab.eos();
    lm.ool_ = vocab.ool();
    lm.logprob_ = Matrix::Constant(V, V, kNegInf);
    for (int r = 0; r < V; ++r) {
      double total = 0.0;
      for (int c = 0; c < V; ++c)
        if (c != vocab.bos() && c != vocab.ool()) total += counts(r, c) + k;
      for (int c = 0; c < V; ++c)
        if (c != vocab.bos() && c != vocab.ool())
          lm.logprob_(r, c) = std::log((counts(r, c) + k) / total);
    }
    return lm;
  }

  static ToyLM train(const Vocab& vocab, const Corpus& corpus, double k = 0.1) {
    std::vector<std::vector<PieceId>> seqs;
    seqs.reserve(corpus.size());
    for (const auto& u : corpus.utterances) {
      std::vector<PieceId> s;
      for (const auto& w : u.words) {
        auto p = tokenize(vocab, w);
        s.insert(s.end(), p.begin(), p.end());
      }
      s.push_back(vocab.eos());
      seqs.push_back(std::move(s));
    }
    return train(vocab, seqs, k);
  }

  double logprob(PieceId prev, PieceId next) const { return logprob_(prev, next); }
  const Matrix& table() const { return logprob_; }
  PieceId bos() const { return bos_; }
  PieceId eos() const { return eos_; }

 private:
  Matrix logprob_;
  PieceId bos_ = 0, eos_ = 0, ool_ = 0;
};

/// Sum of natural-log bigram probabilities from BOS through the final EOS.
inline double lm_score(const ToyLM& lm, const std::vector<PieceId>& pieces) {
  if (pieces.empty() || pieces.back() != lm.eos())
    throw Error("lm_score: sequence must end with EOS");
  double total = 0.0;
  PieceId prev = lm.bos();
  for (PieceId p : pieces) {
    total += lm.logprob(prev, p);
    prev = p;
  }
  return total;
}

/// Internal LM score: the base model forwarded with no acoustics.
inline double ilm_score(const BaseModel& base, const std::vector<PieceId>& pieces) {
  if (pieces.empty() || pieces.back() != base.vocab().eos())
    throw Error("ilm_score: sequence must end with EOS");
  BaseState state = base.ilm_state();
  PieceId prev = base.vocab().bos();
  double total = 0.0;
  for (PieceId p : pieces) {
    BaseStepResult r = base.ilm_step(state, prev);
    total += std::log(r.p_mdl[p]);
    state = std::move(r.next);
    prev = p;
  }
  return total;
}

struct LambdaPair {
  double ilm = 0.0;
  double ext = 0.0;

  void validate() const {
    if (!(ilm >= 0.0 && ilm <= 1.0 && ext >= 0.0 && ext <= 1.0))
      throw Error("lambda weights must lie in [0, 1]");
  }
};

struct ScoredHypothesis {
  Hypothesis hyp;
  double ilm = 0.0;
  double ext = 0.0;
  double total = 0.0;
};

struct RescoredList {
  std::string utt_id;
  std::vector<ScoredHypothesis> hyps;  // total descending (stable)
};

/// LM scores for every hypothesis, computed once so tuning can re-combine
/// them for each grid point.
inline RescoredList attach_lm_scores(const NBestList& nbest, const ToyLM& lm,
                                     const BaseModel& base) {
  RescoredList out;
  out.utt_id = nbest.utt_id;
  for (const auto& h : nbest.hyps) {
    ScoredHypothesis s;
    s.hyp = h;
    s.ilm = ilm_score(base, h.pieces);
    s.ext = lm_score(lm, h.pieces);
    s.total = h.logp;
    out.hyps.push_back(std::move(s));
  }
  return out;
}

inline double combined_score(const ScoredHypothesis& s, const LambdaPair& l) {
  return s.hyp.logp - l.ilm * s.ilm + l.ext * s.ext;
}

/// Re-sorts by the combined score; the hypothesis multiset is unchanged.
inline RescoredList rerank(RescoredList list, const LambdaPair& lambdas) {
  lambdas.validate();
  for (auto& s : list.hyps) s.total = combined_score(s, lambdas);
  std::stable_sort(list.hyps.begin(), list.hyps.end(),
                   [](const ScoredHypothesis& a, const ScoredHypothesis& b) {
                     return a.total > b.total;
                   });
  return list;
}

inline RescoredList rerank(const NBestList& nbest, const LambdaPair& lambdas, const ToyLM& lm,
                           const BaseModel& base) {
  return rerank(attach_lm_scores(nbest, lm, base), lambdas);
}

struct TuneResult {
  LambdaPair best;
  long best_errors = 0;
  long ref_tokens = 0;
  // errors[i][j] for lambda_ilm = i * step, lambda_ext = j * step
  std::vector<std::vector<long>> grid_errors;
};

/// Exhaustive grid over [0, 1]^2 minimizing corpus WER of the reranked
/// top-1. Ties keep the smaller lambda_ilm, then the smaller lambda_ext.
inline TuneResult tune(const std::vector<RescoredList>& dev,
                       const std::vector<std::vector<std::string>>& refs, const Vocab& vocab,
                       double step = 0.1) {
  if (dev.empty()) throw Error("tune: empty dev set");
  if (dev.size() != refs.size()) throw Error("tune: dev lists and references differ in size");
  if (!(step > 0.0 && step <= 1.0)) throw Error("tune: grid step must lie in (0, 1]");
  const int points = static_cast<int>(std::floor(1.0 / step + 1e-9)) + 1;

  // Cache word sequences and per-hypothesis edit distances.
  std::vector<std::vector<long>> hyp_errors(dev.size());
  long ref_tokens = 0;
  for (std::size_t u = 0; u < dev.size(); ++u) {
    ref_tokens += static_cast<long>(refs[u].size());
    for (const auto& s : dev[u].hyps)
      hyp_errors[u].push_back(align(refs[u], detokenize(vocab, s.hyp.pieces)).errors());
  }
  if (ref_tokens == 0) throw Error("tune: zero reference tokens");

  // Rounded so that e.g. 3 * 0.1 reports as 0.3.
  auto grid_point = [step](int i) { return std::min(1.0, std::round(i * step * 1e12) / 1e12); };

  TuneResult result;
  result.ref_tokens = ref_tokens;
  result.grid_errors.assign(static_cast<std::size_t>(points),
                            std::vector<long>(static_cast<std::size_t>(points), 0));
  bool have = false;
  for (int i = 0; i < points; ++i)
    for (int j = 0; j < points; ++j) {
      const LambdaPair l{grid_point(i), grid_point(j)};
      long errors = 0;
      for (std::size_t u = 0; u < dev.size(); ++u) {
        const auto& hyps = dev[u].hyps;
        if (hyps.empty()) {
          errors += static_cast<long>(refs[u].size());
          continue;
        }
        std::size_t best = 0;
        double best_score = combined_score(hyps[0], l);
        for (std::size_t k = 1; k < hyps.size(); ++k) {
          const double s = combined_score(hyps[k], l);
          if (s > best_score) {
            best = k;
            best_score = s;
          }
        }
        errors += hyp_errors[u][best];
      }
      result.grid_errors[i][j] = errors;
      if (!have || errors < result.best_errors) {
        have = true;
        result.best_errors = errors;
        result.best = l;
      }
    }
  return result;
}

}  // namespace tcpbias
