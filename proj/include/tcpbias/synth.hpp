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

// Synthetic benchmark: a pronounceable lexicon split into frequent common
// words and rare words, and train/dev/test/LM-text corpora drawn from it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "tcpbias/common.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias {

struct SynthConfig {
  std::size_t n_common = 300;
  std::size_t n_rare = 3000;
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 500;
  std::size_t n_lm = 20000;  // LM text sentences
  double rare_fraction = 0.1;
  int min_words = 6;
  int max_words = 14;
  double zipf = 1.0;
  std::uint64_t seed = 17;
};

struct SynthData {
  Corpus train, dev, test, lm;
  std::vector<std::string> common_words;
  std::vector<std::string> rare_words;
};

namespace detail {

inline std::string make_word(SplitMix64& rng, int min_syll, int max_syll) {
  static constexpr std::string_view kOnsets = "bcdfghjklmnprstvwz";
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::string_view kCodas = "lmnrst";
  const int n = min_syll + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_syll - min_syll + 1)));
  std::string w;
  for (int s = 0; s < n; ++s) {
    w += kOnsets[rng.below(kOnsets.size())];
    w += kVowels[rng.below(kVowels.size())];
    if (rng.uniform() < 0.3) w += kCodas[rng.below(kCodas.size())];
  }
  return w;
}

inline Corpus make_corpus(const std::string& split, std::size_t n, const SynthConfig& cfg,
                          const std::vector<std::string>& common,
                          const std::vector<std::string>& rare,
                          const std::vector<double>& common_cdf, std::uint64_t stream) {
  Corpus c;
  c.split = split;
  SplitMix64 rng(derive_seed(cfg.seed, stream));
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    char id[64];
    std::snprintf(id, sizeof id, "%s-%05zu", split.c_str(), i);
    u.id = id;
    const int len = cfg.min_words +
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_words - cfg.min_words + 1)));
    for (int k = 0; k < len; ++k) {
      if (rng.uniform() < cfg.rare_fraction) {
        u.words.push_back(rare[rng.below(rare.size())]);
      } else {
        const double r = rng.uniform() * common_cdf.back();
        auto it = std::upper_bound(common_cdf.begin(), common_cdf.end(), r);
        const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - common_cdf.begin()),
                                               common.size() - 1);
        u.words.push_back(common[idx]);
      }
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

}  // namespace detail

inline SynthData generate_benchmark(const SynthConfig& cfg) {
  if (cfg.n_common == 0 || cfg.n_rare == 0) throw Error("synth: empty lexicon");
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words)
    throw Error("synth: invalid sentence length range");
  SynthData data;
  SplitMix64 rng(derive_seed(cfg.seed, 0x1e71c0));
  std::set<std::string> seen;
  auto fill = [&](std::vector<std::string>& out, std::size_t n, int lo, int hi) {
    std::size_t attempts = 0;
    while (out.size() < n) {
      if (++attempts > 100 * n + 1000) throw Error("synth: could not draw enough distinct words");
      std::string w = detail::make_word(rng, lo, hi);
      if (seen.insert(w).second) out.push_back(std::move(w));
    }
  };
  fill(data.common_words, cfg.n_common, 1, 2);
  fill(data.rare_words, cfg.n_rare, 2, 4);

  std::vector<double> cdf(cfg.n_common);
  double acc = 0.0;
  for (std::size_t r = 0; r < cfg.n_common; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf);
    cdf[r] = acc;
  }
  const auto& cw = data.common_words;
  const auto& rw = data.rare_words;
  data.train = detail::make_corpus("train", cfg.n_train, cfg, cw, rw, cdf, 1);
  data.dev = detail::make_corpus("dev", cfg.n_dev, cfg, cw, rw, cdf, 2);
  data.test = detail::make_corpus("test", cfg.n_test, cfg, cw, rw, cdf, 3);
  data.lm = detail::make_corpus("lm", cfg.n_lm, cfg, cw, rw, cdf, 4);
  return data;
}

}  // namespace tcpbias
