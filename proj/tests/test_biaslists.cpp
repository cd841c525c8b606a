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

#include <algorithm>
#include <set>

#include "tcpbias/biaslists.hpp"

namespace tcpbias {
namespace {

std::vector<std::string> numbered(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

TEST(FullRareList, DropsTheMostFrequent) {
  WordCounts f;
  for (int i = 0; i < 10; ++i) f["w" + std::to_string(i)] = 100 - i;
  const auto l = full_rare_list(f, 3);
  EXPECT_EQ(l, (std::vector<std::string>{"w3", "w4", "w5", "w6", "w7", "w8", "w9"}));
  EXPECT_EQ(full_rare_list(f, 0).size(), 10u);
  EXPECT_TRUE(full_rare_list(f, 10).empty());
  EXPECT_TRUE(full_rare_list(f, 50).empty());
}

TEST(FullRareList, TiesRankLexicographically) {
  WordCounts f{{"b", 5}, {"a", 5}, {"c", 1}};
  EXPECT_EQ(full_rare_list(f, 1), (std::vector<std::string>{"b", "c"}));
}

TEST(FrequencyList, KeepsWordsBelowTheThreshold) {
  WordCounts f{{"a", 1}, {"b", 5}, {"c", 2}};
  EXPECT_EQ(frequency_list(f, 3), (std::vector<std::string>{"a", "c"}));
}

TEST(UtteranceList, HitsThenDistractors) {
  const IndexedList full(numbered("r", 2000));
  const std::vector<std::string> ref = {"the", "r5", "cat", "r17", "r5"};
  const BiasingList l = utterance_list("u1", ref, full, 1000, 9);
  ASSERT_EQ(l.words.size(), 1002u);
  EXPECT_EQ(l.num_hits, 2u);
  EXPECT_EQ(l.words[0], "r5");
  EXPECT_EQ(l.words[1], "r17");
  EXPECT_EQ(std::set<std::string>(l.words.begin(), l.words.end()).size(), 1002u);
  EXPECT_EQ(augment_case(l.words).size(), 2004u);

  const BiasingList none = utterance_list("u1", ref, full, 0, 9);
  EXPECT_EQ(none.words, (std::vector<std::string>{"r5", "r17"}));
}

TEST(UtteranceList, SeedsControlTheDistractors) {
  const IndexedList full(numbered("r", 500));
  const std::vector<std::string> ref = {"r1"};
  const auto a = utterance_list("u", ref, full, 50, 1);
  const auto b = utterance_list("u", ref, full, 50, 1);
  const auto c = utterance_list("u", ref, full, 50, 2);
  EXPECT_EQ(a.words, b.words);
  EXPECT_NE(a.words, c.words);
  EXPECT_NE(list_seed(5, "u1"), list_seed(5, "u2"));
}

TEST(UtteranceList, DistractorsAreRoughlyUniform) {
  const IndexedList full(numbered("r", 20));
  std::vector<int> hits(20, 0);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t)
    for (const auto& w : utterance_list("u", {}, full, 5, static_cast<std::uint64_t>(t)).words)
      ++hits[static_cast<std::size_t>(std::stoi(w.substr(1)))];
  for (int h : hits) EXPECT_NEAR(h, trials * 5 / 20, 120);
}

TEST(UtteranceList, SmallPoolThrows) {
  const IndexedList full(numbered("r", 10));
  EXPECT_THROW(utterance_list("u", {"r0"}, full, 10, 1), Error);
  EXPECT_NO_THROW(utterance_list("u", {"r0"}, full, 9, 1));
  EXPECT_THROW(IndexedList({"a", "a"}), Error);
}

std::vector<std::string> words(const std::string& s) { return split_words(s); }

TEST(ErrorBasedList, OneWrongWord) {
  const std::vector<Alignment> a = {align(words("a b c"), words("a x c"), "u1"),
                                    align(words("a c"), words("a c"), "u2")};
  EXPECT_EQ(error_based_list(a), (std::vector<std::string>{"b"}));
}

TEST(ErrorBasedList, NothingWhenAllCorrect) {
  const std::vector<Alignment> a = {align(words("a b"), words("a b"))};
  EXPECT_TRUE(error_based_list(a).empty());
}

TEST(ErrorBasedList, EqualToAverageIsExcluded) {
  const std::vector<Alignment> a = {align(words("a b"), words("x y"))};
  EXPECT_TRUE(error_based_list(a).empty());
}

TEST(ErrorBasedList, InsertionsRaiseTheBar) {
  // WER 2/4 from one deletion and one insertion; "b" has 1/2, not above.
  const std::vector<Alignment> a = {align(words("a b c b"), words("a c b z"))};
  EXPECT_TRUE(error_based_list(a).empty());
  // Without the insertion WER is 1/4 and "b" qualifies.
  EXPECT_EQ(error_based_list({align(words("a b c b"), words("a c b"))}),
            (std::vector<std::string>{"b"}));
}

TEST(ErrorBasedList, IndependentOfUtteranceOrder) {
  std::vector<Alignment> a = {align(words("a b c"), words("a x c")),
                              align(words("d e"), words("d")),
                              align(words("a e f"), words("a e f")),
                              align(words("b b"), words("b q"))};
  const auto want = error_based_list(a);
  std::reverse(a.begin(), a.end());
  EXPECT_EQ(error_based_list(a), want);
  std::rotate(a.begin(), a.begin() + 1, a.end());
  EXPECT_EQ(error_based_list(a), want);
  EXPECT_THROW(error_based_list({}), Error);
}

}  // namespace
}  // namespace tcpbias
