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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tcpbias/decoder.hpp"

namespace tcpbias {
namespace {

Utterance utt(const std::string& id, const std::string& text) { return {id, split_words(text)}; }

std::vector<std::string> fixture_texts() { return {"a b c", "d a", "c c c c", "e", "b d e a c"}; }

TEST(BeamSearch, BeamOneEqualsGreedy) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto base = testing::tiny_base(5, seed);
    const auto params = TcpgenParams::init(4, 4, seed);
    const PrefixTree tree = PrefixTree::build(base->vocab(), {"a", "c"});
    DecodeOptions o;
    o.beam = 1;
    o.nbest = 1;
    o.max_len = 8;
    for (const auto& text : fixture_texts()) {
      const Utterance u = utt("g" + text, text);
      for (const Biasing& b : {Biasing{}, Biasing{&params, &tree}}) {
        const NBestList n = beam_search(*base, b, u, o);
        const Hypothesis g = greedy_decode(*base, b, u, o);
        ASSERT_EQ(n.hyps.size(), 1u);
        EXPECT_EQ(n.hyps[0].pieces, g.pieces);
        EXPECT_EQ(n.hyps[0].logp, g.logp);
      }
    }
  }
}

TEST(BeamSearch, WideBeamFindsExhaustiveArgmax) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto base = testing::tiny_base(4, seed * 7919);
    DecodeOptions o;
    o.beam = 64;
    o.nbest = 1;
    o.max_len = 3;
    const Utterance u = utt("e" + std::to_string(seed), seed % 2 ? "a b" : "d");
    const NBestList n = beam_search(*base, Biasing{}, u, o);
    const auto best = oracle::exhaustive_argmax(*base, u, 3);
    ASSERT_FALSE(n.hyps.empty());
    EXPECT_EQ(n.hyps[0].pieces, best.pieces);
    EXPECT_NEAR(n.hyps[0].logp, best.logp, 1e-12);
  }
}

TEST(BeamSearch, ZeroGateMatchesUnbiasedBitForBit) {
  const auto base = testing::tiny_base(6, 5);
  const auto params = TcpgenParams::init(4, 4, 2);
  const PrefixTree tree = PrefixTree::build(base->vocab(), {"a", "b", "f"});
  DecodeOptions plain;
  plain.beam = 4;
  plain.nbest = 4;
  DecodeOptions zero = plain;
  zero.step.gate_override = 0.0;
  for (const auto& text : fixture_texts()) {
    const Utterance u = utt("z", text);
    const NBestList a = beam_search(*base, Biasing{}, u, plain);
    const NBestList b = beam_search(*base, Biasing{&params, &tree}, u, zero);
    ASSERT_EQ(a.hyps.size(), b.hyps.size());
    for (std::size_t i = 0; i < a.hyps.size(); ++i) {
      EXPECT_EQ(a.hyps[i].pieces, b.hyps[i].pieces);
      EXPECT_EQ(a.hyps[i].logp, b.hyps[i].logp);
    }
  }
}

TEST(BeamSearch, WiderBeamNeverScoresWorse) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto base = testing::tiny_base(5, seed + 100);
    for (const auto& text : fixture_texts()) {
      const Utterance u = utt("d" + text, text);
      double prev = -1e300;
      for (int beam = 1; beam <= 8; ++beam) {
        DecodeOptions o;
        o.beam = beam;
        o.nbest = 1;
        o.max_len = 10;
        const double top = beam_search(*base, Biasing{}, u, o).hyps.at(0).logp;
        EXPECT_GE(top, prev) << "beam " << beam;
        prev = top;
      }
    }
  }
}

TEST(BeamSearch, NBestInvariants) {
  const auto base = testing::tiny_base(5, 42);
  const auto params = TcpgenParams::init(4, 4, 9);
  const PrefixTree tree = PrefixTree::build(base->vocab(), {"a", "e"});
  DecodeOptions o;
  o.beam = 6;
  o.nbest = 4;
  o.max_len = 7;
  o.trace_gen = true;
  const Vocab& v = base->vocab();
  for (const auto& text : fixture_texts()) {
    const NBestList n = beam_search(*base, Biasing{&params, &tree}, utt("n", text), o);
    ASSERT_LE(n.hyps.size(), 4u);
    EXPECT_EQ(n.beam, 6);
    for (std::size_t i = 0; i < n.hyps.size(); ++i) {
      const Hypothesis& h = n.hyps[i];
      EXPECT_LE(h.logp, 0.0);
      EXPECT_TRUE(h.finished);
      EXPECT_EQ(h.pieces.back(), v.eos());
      EXPECT_LE(static_cast<int>(h.pieces.size()), o.max_len);
      EXPECT_EQ(h.gen_trace.size(), h.pieces.size());
      TrieCursor c = TrieCursor::root();
      for (std::size_t k = 0; k + 1 < h.pieces.size(); ++k) c = advance(tree, v, c, h.pieces[k]);
      EXPECT_EQ(c, h.cursor);
      if (i > 0) {
        const Hypothesis& p = n.hyps[i - 1];
        EXPECT_TRUE(p.logp > h.logp || (p.logp == h.logp && p.pieces < h.pieces));
      }
    }
  }
}

TEST(BeamSearch, MaxLenForcesEos) {
  const auto base = testing::tiny_base(3, 1);
  DecodeOptions o;
  o.beam = 3;
  o.nbest = 3;
  o.max_len = 1;
  const NBestList n = beam_search(*base, Biasing{}, utt("m", "a b c"), o);
  ASSERT_EQ(n.hyps.size(), 1u);
  EXPECT_EQ(n.hyps[0].pieces, std::vector<PieceId>{base->vocab().eos()});
}

TEST(BeamSearch, RejectsBadSettings) {
  const auto base = testing::tiny_base(3, 1);
  DecodeOptions o;
  o.beam = 0;
  EXPECT_THROW(beam_search(*base, Biasing{}, utt("r", "a"), o), Error);
  o.beam = 2;
  o.nbest = 3;
  EXPECT_THROW(beam_search(*base, Biasing{}, utt("r", "a"), o), Error);
}

TEST(BeamSearch, RepeatedDecodesAreIdentical) {
  const auto base = testing::tiny_base(6, 77);
  DecodeOptions o;
  const Utterance u = utt("rep", "a b c d e f");
  const NBestList a = beam_search(*base, Biasing{}, u, o);
  const NBestList b = beam_search(*base, Biasing{}, u, o);
  ASSERT_EQ(a.hyps.size(), b.hyps.size());
  for (std::size_t i = 0; i < a.hyps.size(); ++i) {
    EXPECT_EQ(a.hyps[i].pieces, b.hyps[i].pieces);
    EXPECT_EQ(a.hyps[i].logp, b.hyps[i].logp);
  }
}

}  // namespace
}  // namespace tcpbias
