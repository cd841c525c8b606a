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

// Frozen base recognizer interface and a deterministic synthetic stand-in.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "tcpbias/common.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias {

/// Decoding position inside one utterance. The synthetic model is position
/// synchronous: step i always scores the i-th reference piece.
struct BaseState {
  std::shared_ptr<const std::vector<PieceId>> truth;  // null on the ILM path
  std::uint64_t utt_key = 0;
  std::size_t pos = 0;
};

struct BaseStepResult {
  Vector h_dec;
  Vector p_mdl;
  BaseState next;
};

/// A frozen recognizer exposing its final decoder state and output
/// distribution. Nothing here mutates the model.
class BaseModel {
 public:
  virtual ~BaseModel() = default;

  virtual const Vocab& vocab() const = 0;
  virtual int d_dec() const = 0;
  // Wordpiece embedding table, vocab.size() x vocab.d_emb().
  virtual const Matrix& embeddings() const = 0;

  virtual BaseState init_state(const Utterance& utt) const = 0;
  // State for the acoustics-free (zero encoder) path.
  virtual BaseState ilm_state() const { return BaseState{}; }

  virtual BaseStepResult step(const BaseState& state, PieceId prev) const = 0;
  virtual BaseStepResult ilm_step(const BaseState& state, PieceId prev) const = 0;
};

struct SyntheticBaseConfig {
  int d_dec = 64;
  double acc_common = 0.9;
  double acc_rare = 0.5;
  std::vector<PieceId> rare_pieces;
  double snr = 0.8;
  Matrix ilm;  // vocab.size() x vocab.size(), row = previous piece
  std::uint64_t seed = 17;
};

/// Add-k bigram over pieces estimated from reference transcripts. Rows for
/// BOS and every ordinary piece are estimated; EOS/OOL rows are uniform.
/// BOS and OOL never receive probability.
inline Matrix estimate_ilm(const Vocab& vocab, const Corpus& corpus, double k = 0.5) {
  const int V = vocab.size();
  Matrix counts = Matrix::Zero(V, V);
  for (const auto& u : corpus.utterances) {
    PieceId prev = vocab.bos();
    for (const auto& w : u.words)
      for (PieceId p : tokenize(vocab, w)) {
        counts(prev, p) += 1.0;
        prev = p;
      }
    counts(prev, vocab.eos()) += 1.0;
  }
  Matrix ilm = Matrix::Zero(V, V);
  for (int r = 0; r < V; ++r) {
    const bool estimated = r == vocab.bos() || !vocab.is_special(r);
    double total = 0.0;
    for (int c = 0; c < V; ++c) {
      if (c == vocab.bos() || c == vocab.ool()) continue;
      ilm(r, c) = estimated ? counts(r, c) + k : 1.0;
      total += ilm(r, c);
    }
    ilm.row(r) /= total;
  }
  return ilm;
}

/// Pieces used by rare words and by no common word.
inline std::vector<PieceId> designate_rare_pieces(const Vocab& vocab,
                                                  const std::vector<std::string>& rare_words,
                                                  const std::vector<std::string>& common_words) {
  std::unordered_set<PieceId> common;
  for (const auto& w : common_words)
    for (PieceId p : tokenize(vocab, w)) common.insert(p);
  std::set<PieceId> rare;
  for (const auto& w : rare_words)
    for (PieceId p : tokenize(vocab, w))
      if (!common.contains(p)) rare.insert(p);
  return {rare.begin(), rare.end()};
}

/// Deterministic synthetic recognizer.
///
/// For reference piece t at position i a seeded draw decides whether the
/// model is right (probability acc_rare for rare pieces, acc_common
/// otherwise). The winner (t, or a random confuser when wrong) gets a peak
/// mass in [0.55, 0.85], the loser 70% of the remainder, and the rest is
/// spread half along the ILM row and half uniformly. The argmax is always
/// the winner, so greedy piece accuracy equals the configured accuracy.
///
/// h_dec = snr * P e(t) + 0.3 * P e(prev) + (1 - snr) * noise, with P the
/// identity when d_dec == d_emb and a fixed random projection otherwise.
class SyntheticBase final : public BaseModel {
 public:
  static constexpr double kPeakLow = 0.55;
  static constexpr double kPeakHigh = 0.85;
  static constexpr double kRunnerShare = 0.7;
  static constexpr double kIlmShare = 0.5;
  static constexpr double kPrevWeight = 0.3;

  SyntheticBase(Vocab vocab, SyntheticBaseConfig config)
      : vocab_(std::move(vocab)), cfg_(std::move(config)) {
    const int V = vocab_.size();
    if (cfg_.d_dec <= 0) throw Error("synthetic base: d_dec must be positive");
    if (!(cfg_.acc_common > 0.0 && cfg_.acc_common < 1.0) ||
        !(cfg_.acc_rare > 0.0 && cfg_.acc_rare < 1.0))
      throw Error("synthetic base: accuracies must lie in (0, 1)");
    if (cfg_.acc_rare > cfg_.acc_common)
      throw Error("synthetic base: acc_rare must not exceed acc_common");
    if (!(cfg_.snr >= 0.0 && cfg_.snr <= 1.0))
      throw Error("synthetic base: snr must lie in [0, 1]");
    if (cfg_.ilm.rows() != V || cfg_.ilm.cols() != V)
      throw Error("synthetic base: ILM table must be " + std::to_string(V) + "x" +
                  std::to_string(V));
    for (int r = 0; r < V; ++r) {
      if ((cfg_.ilm.row(r).array() < 0.0).any() || !cfg_.ilm.row(r).allFinite())
        throw Error("synthetic base: invalid ILM row " + std::to_string(r));
      if (std::abs(cfg_.ilm.row(r).sum() - 1.0) > 1e-9)
        throw Error("synthetic base: ILM row " + std::to_string(r) + " is not normalized");
      if (cfg_.ilm(r, vocab_.bos()) != 0.0 || cfg_.ilm(r, vocab_.ool()) != 0.0)
        throw Error("synthetic base: ILM assigns mass to BOS/OOL");
    }
    is_rare_.assign(static_cast<std::size_t>(V), false);
    for (PieceId p : cfg_.rare_pieces) {
      if (p < 0 || p >= V || vocab_.is_special(p))
        throw Error("synthetic base: rare piece id out of range");
      is_rare_[static_cast<std::size_t>(p)] = true;
    }

    const int d_emb = vocab_.d_emb();
    SplitMix64 rng(derive_seed(cfg_.seed, 0xe3b));
    std::normal_distribution<double> normal(0.0, 1.0);
    embeddings_.resize(V, d_emb);
    for (Eigen::Index i = 0; i < embeddings_.size(); ++i) embeddings_.data()[i] = normal(rng);
    if (cfg_.d_dec != d_emb) {
      projection_.resize(cfg_.d_dec, d_emb);
      const double s = 1.0 / std::sqrt(static_cast<double>(d_emb));
      for (Eigen::Index i = 0; i < projection_.size(); ++i)
        projection_.data()[i] = s * normal(rng);
    }
    for (PieceId p = 0; p < V; ++p)
      if (p != vocab_.bos() && p != vocab_.ool()) support_.push_back(p);
  }

  const Vocab& vocab() const override { return vocab_; }
  int d_dec() const override { return cfg_.d_dec; }
  const Matrix& embeddings() const override { return embeddings_; }
  const SyntheticBaseConfig& config() const { return cfg_; }
  bool is_rare(PieceId p) const { return is_rare_.at(static_cast<std::size_t>(p)); }

  BaseState init_state(const Utterance& utt) const override {
    auto truth = std::make_shared<std::vector<PieceId>>();
    for (const auto& w : utt.words) {
      auto pieces = tokenize(vocab_, w);
      truth->insert(truth->end(), pieces.begin(), pieces.end());
    }
    return BaseState{std::move(truth), fnv1a(utt.id), 0};
  }

  PieceId truth_at(const BaseState& state) const {
    if (!state.truth) throw Error("synthetic base: no acoustics on this state");
    return state.pos < state.truth->size() ? (*state.truth)[state.pos] : vocab_.eos();
  }

  BaseStepResult step(const BaseState& state, PieceId prev) const override {
    check_prev(prev);
    const PieceId t = truth_at(state);
    const double acc = is_rare_[static_cast<std::size_t>(t)] ? cfg_.acc_rare : cfg_.acc_common;

    SplitMix64 rng(derive_seed(cfg_.seed, 0xacc, state.utt_key, state.pos));
    const bool correct = rng.uniform() < acc;
    const double peak = kPeakLow + (kPeakHigh - kPeakLow) * rng.uniform();
    const PieceId confuser = draw_confuser(rng, t);

    BaseStepResult out;
    const double rest_share = 1.0 - kRunnerShare;
    out.p_mdl = Vector::Zero(vocab_.size());
    double rest = 1.0 - peak;
    if (confuser >= 0) {
      out.p_mdl[correct ? t : confuser] += peak;
      out.p_mdl[correct ? confuser : t] += kRunnerShare * (1.0 - peak);
      rest = rest_share * (1.0 - peak);
    } else {
      out.p_mdl[t] += peak;
    }
    spread(out.p_mdl, rest, prev);

    out.h_dec = hidden(prev, t, derive_seed(cfg_.seed, 0x401, state.utt_key, state.pos, prev));
    out.next = state;
    ++out.next.pos;
    return out;
  }

  BaseStepResult ilm_step(const BaseState& state, PieceId prev) const override {
    check_prev(prev);
    BaseStepResult out;
    out.p_mdl = cfg_.ilm.row(prev).transpose();
    out.h_dec = hidden(prev, -1, derive_seed(cfg_.seed, 0x11e, state.pos, prev));
    out.next = state;
    ++out.next.pos;
    return out;
  }

 private:
  void check_prev(PieceId prev) const {
    if (prev == vocab_.eos()) throw Error("synthetic base: stepping past EOS");
    if (prev < 0 || prev >= vocab_.size() || prev == vocab_.ool())
      throw Error("synthetic base: invalid previous piece");
  }

  // Uniform over the support minus the truth; EOS is excluded unless it is
  // the truth. -1 when nothing is left.
  PieceId draw_confuser(SplitMix64& rng, PieceId t) const {
    const PieceId eos = vocab_.eos();
    std::size_t excluded = 1 + (t != eos ? 1 : 0);
    if (support_.size() <= excluded) return -1;
    std::uint64_t k = rng.below(support_.size() - excluded);
    for (PieceId p : support_) {
      if (p == t || (t != eos && p == eos)) continue;
      if (k-- == 0) return p;
    }
    return -1;
  }

  void spread(Vector& p, double mass, PieceId prev) const {
    const double uniform = (1.0 - kIlmShare) * mass / static_cast<double>(support_.size());
    const double along = kIlmShare * mass;
    for (PieceId s : support_) p[s] += uniform + along * cfg_.ilm(prev, s);
  }

  Vector project(const Vector& e) const {
    return projection_.size() == 0 ? e : Vector(projection_ * e);
  }

  Vector hidden(PieceId prev, PieceId truth, std::uint64_t noise_seed) const {
    Vector h = kPrevWeight * project(embeddings_.row(prev).transpose());
    if (truth >= 0) h += cfg_.snr * project(embeddings_.row(truth).transpose());
    SplitMix64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double w = 1.0 - cfg_.snr;
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] += w * normal(rng);
    return h;
  }

  Vocab vocab_;
  SyntheticBaseConfig cfg_;
  std::vector<bool> is_rare_;
  Matrix embeddings_;
  Matrix projection_;
  std::vector<PieceId> support_;
};

}  // namespace tcpbias
