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

// Teacher-forced training of the biasing head against a frozen base model.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "tcpbias/basemodel.hpp"
#include "tcpbias/biaslists.hpp"
#include "tcpbias/common.hpp"
#include "tcpbias/tcpgen.hpp"
#include "tcpbias/trie.hpp"

namespace tcpbias {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  std::size_t distractors = 100;
  std::uint64_t seed = 17;
  AdamConfig adam;
  double warmup_frac = 0.1;
  double hold_frac = 0.4;
  StepOptions step;
  bool train_keys = false;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;  // at the last update of the epoch
};

struct TrainResult {
  TcpgenParams params;
  double initial_train_loss = 0.0;
  double initial_dev_loss = 0.0;
  std::vector<EpochLog> log;
};

/// The frozen base model's outputs along the reference, computed once.
struct ForcedPass {
  std::vector<std::string> words;
  std::vector<Vector> h_dec;
  std::vector<double> p_target;
  std::vector<PieceId> targets;  // reference pieces then EOS
};

inline ForcedPass forced_pass(const BaseModel& base, const Utterance& utt) {
  const Vocab& vocab = base.vocab();
  ForcedPass fp;
  fp.words = utt.words;
  for (const auto& w : utt.words) {
    auto p = tokenize(vocab, w);
    fp.targets.insert(fp.targets.end(), p.begin(), p.end());
  }
  fp.targets.push_back(vocab.eos());
  BaseState state = base.init_state(utt);
  PieceId prev = vocab.bos();
  for (PieceId t : fp.targets) {
    BaseStepResult r = base.step(state, prev);
    fp.h_dec.push_back(std::move(r.h_dec));
    fp.p_target.push_back(r.p_mdl[t]);
    state = std::move(r.next);
    prev = t;
  }
  return fp;
}

/// Builds the trie from `list_words` (indices into `tokenized`) and records
/// the valid set at each teacher-forced step.
inline TrainingSequence make_training_sequence(const ForcedPass& fp, const Vocab& vocab,
                                               const std::vector<std::vector<PieceId>>& tokenized,
                                               const std::vector<std::size_t>& list_words,
                                               bool ool_enabled) {
  std::vector<std::vector<PieceId>> seqs;
  seqs.reserve(list_words.size());
  for (std::size_t i : list_words) seqs.push_back(tokenized[i]);
  const PrefixTree tree = PrefixTree::from_sequences(vocab, seqs);

  TrainingSequence s;
  s.h_dec = fp.h_dec;
  s.p_target = fp.p_target;
  s.targets = fp.targets;
  TrieCursor cursor = TrieCursor::root();
  for (std::size_t i = 0; i < fp.targets.size(); ++i) {
    s.valid.push_back(valid_set(tree, vocab, cursor, ool_enabled));
    if (fp.targets[i] != vocab.eos()) cursor = advance(tree, vocab, cursor, fp.targets[i]);
  }
  return s;
}

namespace detail {

inline std::uint64_t train_list_seed(std::uint64_t seed, int epoch, std::size_t utt) {
  return derive_seed(seed, 0x7a11, static_cast<std::uint64_t>(epoch), utt);
}

}  // namespace detail

/// Adam on the head's parameters only; the base model is read, never
/// written. Each epoch resamples every utterance's distractors.
inline TrainResult train(TcpgenParams params, const Corpus& train_corpus, const Corpus& dev_corpus,
                         const BaseModel& base, const std::vector<std::string>& full_list,
                         const TrainConfig& cfg) {
  const Vocab& vocab = base.vocab();
  params.validate(vocab.d_emb(), base.d_dec(), vocab.size());
  if (cfg.epochs < 0) throw Error("train: negative epoch count");
  if (cfg.batch_size <= 0) throw Error("train: batch size must be positive");
  if (cfg.train_keys && !params.key_table) params.key_table = base.embeddings();

  TrainResult result;
  if (cfg.epochs == 0) {
    result.params = std::move(params);
    return result;
  }
  if (train_corpus.empty()) throw Error("train: empty training corpus");

  const IndexedList full(full_list);
  std::vector<std::vector<PieceId>> tokenized;
  tokenized.reserve(full.size());
  for (const auto& w : full.words()) tokenized.push_back(tokenize(vocab, w));

  std::vector<ForcedPass> train_fp, dev_fp;
  for (const auto& u : train_corpus.utterances) train_fp.push_back(forced_pass(base, u));
  for (const auto& u : dev_corpus.utterances) dev_fp.push_back(forced_pass(base, u));

  auto sequence_for = [&](const ForcedPass& fp, std::uint64_t seed) {
    std::size_t hits = 0;
    {
      std::unordered_set<std::string> distinct;
      for (const auto& w : fp.words)
        if (full.find(w) && distinct.insert(w).second) ++hits;
    }
    const std::size_t n = std::min(cfg.distractors, full.size() - hits);
    const auto idx = sample_list_indices(fp.words, full, n, seed);
    return make_training_sequence(fp, vocab, tokenized, idx, cfg.step.ool_enabled);
  };

  const Matrix& emb = base.embeddings();
  const PieceId ool = vocab.ool();
  auto corpus_loss = [&](const std::vector<ForcedPass>& fps, int epoch, bool dev) {
    if (fps.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t u = 0; u < fps.size(); ++u) {
      const std::uint64_t seed = dev ? derive_seed(cfg.seed, 0xde5, u)
                                     : detail::train_list_seed(cfg.seed, epoch, u);
      const TrainingSequence s = sequence_for(fps[u], seed);
      total += batch_loss(params, std::span<const TrainingSequence>(&s, 1), emb, ool, cfg.step);
    }
    return total / static_cast<double>(fps.size());
  };

  result.initial_train_loss = corpus_loss(train_fp, 1, false);
  result.initial_dev_loss = corpus_loss(dev_fp, 0, true);

  const std::size_t n = train_fp.size();
  const long batches_per_epoch =
      static_cast<long>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                        static_cast<std::size_t>(cfg.batch_size));
  TriStageSchedule schedule(batches_per_epoch * cfg.epochs, cfg.adam.peak_lr, cfg.warmup_frac,
                            cfg.hold_frac);
  Adam adam(params, cfg.adam);
  long global_step = 0;

  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 0x5f1e, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainingSequence> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k)
        batch.push_back(sequence_for(train_fp[order[k]],
                                     detail::train_list_seed(cfg.seed, epoch, order[k])));
      LossAndGradients lg;
      try {
        lg = backward(params, batch, emb, ool, cfg.step);
      } catch (const Error& e) {
        throw Error("train: diverged at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(global_step) + ": " + e.what());
      }
      if (!std::isfinite(lg.loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(global_step));
      epoch_loss += lg.loss * static_cast<double>(end - start);
      lr = schedule.lr(global_step);
      adam.step(params, lg.grad, lr);
      ++global_step;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(n);
    log.dev_loss = corpus_loss(dev_fp, 0, true);
    log.lr = lr;
    result.log.push_back(log);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace tcpbias
