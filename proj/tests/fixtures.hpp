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

// Small shared fixtures for the unit tests and the acceptance runner.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tcpbias/basemodel.hpp"
#include "tcpbias/common.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias::testing {

// Pieces for the "Sophia, Franklin and Francisco" example, plus a pure
// character fallback so any lowercase word is encodable.
inline Vocab name_vocab(int d_emb = 4) {
  std::vector<std::string> pieces = {"_So", "phia", "_Fran", "klin", "cisco"};
  for (char c = 'a'; c <= 'z'; ++c) {
    pieces.push_back(std::string("_") + c);
    pieces.push_back(std::string(1, c));
  }
  for (char c = 'A'; c <= 'Z'; ++c) pieces.push_back(std::string("_") + c);
  return Vocab(std::move(pieces), d_emb);
}

// Random row-stochastic ILM table with zero mass on BOS and OOL.
inline Matrix random_ilm(const Vocab& v, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int V = v.size();
  Matrix m = Matrix::Zero(V, V);
  for (int r = 0; r < V; ++r) {
    double total = 0.0;
    for (int c = 0; c < V; ++c) {
      if (c == v.bos() || c == v.ool()) continue;
      m(r, c) = 0.05 + rng.uniform();
      total += m(r, c);
    }
    m.row(r) /= total;
  }
  return m;
}

// A base over `n` single-letter word-initial pieces ("_a", "_b", ...).
inline std::shared_ptr<SyntheticBase> tiny_base(int n, std::uint64_t seed, double acc_common = 0.7,
                                                double acc_rare = 0.4, int d_emb = 4, int d_dec = 4,
                                                double snr = 0.8) {
  std::vector<std::string> pieces;
  for (int i = 0; i < n; ++i) pieces.push_back(std::string("_") + static_cast<char>('a' + i));
  Vocab v(std::move(pieces), d_emb);
  SyntheticBaseConfig c;
  c.d_dec = d_dec;
  c.acc_common = acc_common;
  c.acc_rare = acc_rare;
  c.snr = snr;
  c.seed = seed;
  c.rare_pieces = {0};
  c.ilm = random_ilm(v, derive_seed(seed, 1));
  return std::make_shared<SyntheticBase>(std::move(v), std::move(c));
}

}  // namespace tcpbias::testing
