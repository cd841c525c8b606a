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

// Corpus-level glue: benchmark preparation, parallel decoding, list
// construction, scoring and the distractor sweep.

#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tcpbias/basemodel.hpp"
#include "tcpbias/biaslists.hpp"
#include "tcpbias/decoder.hpp"
#include "tcpbias/score.hpp"
#include "tcpbias/synth.hpp"
#include "tcpbias/tcpgen.hpp"
#include "tcpbias/textproc.hpp"
#include "tcpbias/train.hpp"
#include "tcpbias/trie.hpp"

namespace tcpbias {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is split into
/// contiguous blocks; callers write results by index, so output order never
/// depends on the worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t lo = n * t / w, hi = n * (t + 1) / w;
    threads.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct BenchmarkConfig {
  SynthConfig synth;
  int vocab_size = 1000;
  int d_emb = 64;
  int d_dec = 64;
  double acc_common = 0.9;
  double acc_rare = 0.5;
  double snr = 0.8;
  double ilm_k = 0.5;
  std::uint64_t base_seed = 17;
};

struct Benchmark {
  SynthData data;
  std::shared_ptr<const SyntheticBase> base;
};

inline SyntheticBaseConfig make_base_config(const BenchmarkConfig& cfg, const Vocab& vocab,
                                            const SynthData& data) {
  SyntheticBaseConfig bc;
  bc.d_dec = cfg.d_dec;
  bc.acc_common = cfg.acc_common;
  bc.acc_rare = cfg.acc_rare;
  bc.snr = cfg.snr;
  bc.seed = cfg.base_seed;
  bc.rare_pieces = designate_rare_pieces(vocab, data.rare_words, data.common_words);
  bc.ilm = estimate_ilm(vocab, data.train, cfg.ilm_k);
  return bc;
}

/// Generates the corpora, learns the vocabulary on the LM text and builds
/// the frozen synthetic base.
inline Benchmark prepare_benchmark(const BenchmarkConfig& cfg) {
  Benchmark b;
  b.data = generate_benchmark(cfg.synth);
  Vocab vocab = build_vocab(b.data.lm, cfg.vocab_size, cfg.d_emb);
  SyntheticBaseConfig bc = make_base_config(cfg, vocab, b.data);
  b.base = std::make_shared<const SyntheticBase>(std::move(vocab), std::move(bc));
  return b;
}

/// Rare-word simulation lists for every utterance of a corpus.
inline std::vector<BiasingList> make_utterance_lists(const Corpus& corpus,
                                                     const std::vector<std::string>& full,
                                                     std::size_t n_distractors,
                                                     std::uint64_t seed, bool case_augment) {
  const IndexedList indexed(full);
  std::vector<BiasingList> lists;
  lists.reserve(corpus.size());
  for (const auto& u : corpus.utterances) {
    BiasingList l = utterance_list(u.id, u.words, indexed, n_distractors, list_seed(seed, u.id));
    if (case_augment) l.words = augment_case(l.words);
    lists.push_back(std::move(l));
  }
  return lists;
}

inline std::unordered_map<std::string, WordSet> list_sets(const std::vector<BiasingList>& lists) {
  std::unordered_map<std::string, WordSet> out;
  for (const auto& l : lists) out[l.utt_id] = WordSet(l.words.begin(), l.words.end());
  return out;
}

/// Decodes every utterance. When `params` is set each utterance is biased
/// with its own list (looked up by id; a single "global" list applies to
/// all utterances).
inline std::vector<NBestList> decode_corpus(const BaseModel& base, const Corpus& corpus,
                                            const TcpgenParams* params,
                                            const std::vector<BiasingList>* lists,
                                            const DecodeOptions& opts, int workers = 1) {
  std::unordered_map<std::string, const BiasingList*> by_id;
  const BiasingList* global = nullptr;
  if (params) {
    if (!lists) throw Error("decode: biasing requires lists");
    params->validate(base.vocab().d_emb(), base.d_dec(), base.vocab().size());
    for (const auto& l : *lists) {
      if (l.utt_id == "global") global = &l;
      by_id[l.utt_id] = &l;
    }
  }
  std::shared_ptr<const PrefixTree> global_tree;
  if (global) global_tree = std::make_shared<PrefixTree>(PrefixTree::build(base.vocab(), global->words));

  std::vector<NBestList> out(corpus.size());
  parallel_for(corpus.size(), workers, [&](std::size_t i) {
    const Utterance& u = corpus.utterances[i];
    if (!params) {
      out[i] = beam_search(base, Biasing{}, u, opts);
      return;
    }
    std::optional<PrefixTree> own;
    const PrefixTree* tree = global_tree.get();
    if (auto it = by_id.find(u.id); it != by_id.end() && it->second != global) {
      own = PrefixTree::build(base.vocab(), it->second->words);
      tree = &*own;
    }
    if (!tree) throw Error("decode: no biasing list for utterance " + u.id);
    out[i] = beam_search(base, Biasing{params, tree}, u, opts);
  });
  return out;
}

inline std::vector<std::vector<std::string>> top1_words(const Vocab& vocab,
                                                        const std::vector<NBestList>& nbest) {
  std::vector<std::vector<std::string>> out;
  out.reserve(nbest.size());
  for (const auto& n : nbest)
    out.push_back(n.hyps.empty() ? std::vector<std::string>{} : detokenize(vocab, n.hyps[0].pieces));
  return out;
}

/// Words in `eval` references absent from the training transcripts.
inline WordSet oov_words(const Corpus& train, const Corpus& eval) {
  WordSet known;
  for (const auto& u : train.utterances) known.insert(u.words.begin(), u.words.end());
  WordSet oov;
  for (const auto& u : eval.utterances)
    for (const auto& w : u.words)
      if (!known.contains(w)) oov.insert(w);
  return oov;
}

inline ScoreReport score_decodes(const Corpus& refs,
                                 const std::vector<std::vector<std::string>>& hyps,
                                 const std::vector<BiasingList>* lists, const WordSet* oov,
                                 bool normalize = false) {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> ref_words;
  std::vector<std::vector<std::string>> hyp_words;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ids.push_back(refs.utterances[i].id);
    ref_words.push_back(normalize ? simple_normalize(refs.utterances[i].words)
                                  : refs.utterances[i].words);
    hyp_words.push_back(normalize ? simple_normalize(hyps.at(i)) : hyps.at(i));
  }
  std::unordered_map<std::string, WordSet> sets;
  if (lists) {
    sets = list_sets(*lists);
    // A global list covers every utterance.
    if (auto g = sets.find("global"); g != sets.end())
      for (const auto& id : ids)
        if (!sets.contains(id)) sets[id] = g->second;
  }
  return score_corpus(ids, ref_words, hyp_words, lists ? &sets : nullptr, oov);
}

/// Decodes the training set with the frozen base and keeps the words it
/// gets wrong more often than average.
inline std::vector<std::string> extract_error_list(const BaseModel& base, const Corpus& train,
                                                   const DecodeOptions& opts, int workers = 1) {
  const auto nbest = decode_corpus(base, train, nullptr, nullptr, opts, workers);
  const auto hyps = top1_words(base.vocab(), nbest);
  std::vector<Alignment> aligns;
  aligns.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    aligns.push_back(align(train.utterances[i].words, hyps[i], train.utterances[i].id));
  return error_based_list(aligns);
}

struct SweepRow {
  std::size_t distractors = 0;
  ScoreReport biased;
  ScoreReport baseline;
};

/// Decodes with and without biasing at several list sizes. The baseline is
/// scored against the same lists so R-WER counts the same word classes.
inline std::vector<SweepRow> sweep(const BaseModel& base, const TcpgenParams& params,
                                   const Corpus& test, const Corpus& train,
                                   const std::vector<std::string>& full,
                                   const std::vector<std::size_t>& counts, std::uint64_t seed,
                                   const DecodeOptions& opts, int workers = 1,
                                   bool case_augment = false) {
  const WordSet oov = oov_words(train, test);
  const auto base_hyps =
      top1_words(base.vocab(), decode_corpus(base, test, nullptr, nullptr, opts, workers));
  std::vector<SweepRow> rows;
  for (std::size_t n : counts) {
    const auto lists = make_utterance_lists(test, full, n, seed, case_augment);
    const auto hyps =
        top1_words(base.vocab(), decode_corpus(base, test, &params, &lists, opts, workers));
    SweepRow row;
    row.distractors = n;
    row.biased = score_decodes(test, hyps, &lists, &oov);
    row.baseline = score_decodes(test, base_hyps, &lists, &oov);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tcpbias
