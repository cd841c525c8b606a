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

#include <random>

#include "fixtures.hpp"
#include "tcpbias/io.hpp"

namespace tcpbias {
namespace {

namespace fs = std::filesystem;
using io::json;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("tcpbias_io_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

TEST_F(IoTest, CorpusRoundTrip) {
  Corpus c;
  c.utterances = {{"u1", {"hello", "world"}}, {"u2", {"x"}}};
  const io::RunMeta meta{"test", "abc", {{"seed", 3}}};
  io::write_corpus(path("c.jsonl"), c, &meta);
  const Corpus back = io::read_corpus(path("c.jsonl"), "dev");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.utterances[0].words, c.utterances[0].words);
  EXPECT_EQ(back.utterances[1].id, "u2");
  EXPECT_EQ(back.split, "dev");
  EXPECT_THROW(io::read_corpus(path("missing.jsonl")), Error);
}

TEST_F(IoTest, VocabRoundTrip) {
  const Vocab v = testing::name_vocab(6);
  io::write_vocab(path("v.txt"), v);
  const Vocab back = io::read_vocab(path("v.txt"), 6);
  EXPECT_EQ(back.pieces(), v.pieces());
  EXPECT_EQ(back.d_emb(), 6);
  io::write_word_list(path("bad.txt"), {"_a", "b"});
  EXPECT_THROW(io::read_vocab(path("bad.txt")), Error);
}

TEST_F(IoTest, ListsRoundTrip) {
  BiasingList a{"u1", {"franco", "sophia"}, ListProvenance::kRareSim, 1};
  BiasingList g{"global", {"x"}, ListProvenance::kErrorBased, 0};
  io::write_lists(path("l.jsonl"), {a, g});
  const auto back = io::read_lists(path("l.jsonl"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].words, a.words);
  EXPECT_EQ(back[0].num_hits, 1u);
  EXPECT_EQ(back[1].provenance, ListProvenance::kErrorBased);
}

TEST_F(IoTest, CheckpointRoundTripIsExact) {
  const auto base = testing::tiny_base(5, 4, 0.7, 0.4, 3, 5);
  TcpgenParams p = TcpgenParams::init(3, 5, 11);
  p.W1.setConstant(0.1 / 3.0);
  p.key_table = base->embeddings() * 1.5;
  io::write_checkpoint(path("ck.json"), p);
  const TcpgenParams back = io::read_checkpoint(path("ck.json"), *base);
  EXPECT_EQ(back.W, p.W);
  EXPECT_EQ(back.W1, p.W1);
  EXPECT_EQ(back.W2, p.W2);
  EXPECT_EQ(back.ool_embedding, p.ool_embedding);
  ASSERT_TRUE(back.key_table.has_value());
  EXPECT_EQ(*back.key_table, *p.key_table);
}

TEST_F(IoTest, CheckpointShapeErrors) {
  const auto base = testing::tiny_base(5, 4, 0.7, 0.4, 3, 5);
  io::write_checkpoint(path("wrong.json"), TcpgenParams::zeros(4, 5));
  EXPECT_THROW(io::read_checkpoint(path("wrong.json"), *base), Error);

  json j = io::checkpoint_json(TcpgenParams::zeros(3, 5));
  j["W"].erase(0);
  EXPECT_THROW(io::checkpoint_from_json(j), Error);
  j = io::checkpoint_json(TcpgenParams::zeros(3, 5));
  j["version"] = 99;
  EXPECT_THROW(io::checkpoint_from_json(j), Error);

  std::ofstream(path("junk.json")) << "{not json";
  EXPECT_THROW(io::read_checkpoint(path("junk.json"), *base), Error);
}

TEST_F(IoTest, NBestRoundTrip) {
  const auto base = testing::tiny_base(4, 8);
  Utterance u{"u1", {"a", "c"}};
  DecodeOptions opts;
  opts.beam = 4;
  opts.nbest = 3;
  opts.max_len = 5;
  NBestList l = beam_search(*base, Biasing{}, u, opts);
  io::write_nbest(path("n.jsonl"), base->vocab(), {l});
  const auto back = io::read_nbest(path("n.jsonl"), base->vocab());
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].hyps.size(), l.hyps.size());
  for (std::size_t i = 0; i < l.hyps.size(); ++i) {
    EXPECT_EQ(back[0].hyps[i].pieces, l.hyps[i].pieces);
    EXPECT_EQ(back[0].hyps[i].logp, l.hyps[i].logp);
  }
  const auto words = io::read_hypotheses(path("n.jsonl"));
  EXPECT_EQ(words.at("u1"), detokenize(base->vocab(), l.hyps[0].pieces));
}

TEST_F(IoTest, BaseConfigRoundTrip) {
  const auto base = testing::tiny_base(4, 21, 0.8, 0.3, 4, 6, 0.7);
  io::write_vocab(path("vocab.txt"), base->vocab());
  io::write_word_list(path("rare_pieces.txt"), {"_a"});
  io::write_ilm(path("ilm.json"), base->config().ilm);
  io::BaseFiles files;
  files.ilm = "ilm.json";
  io::write_base_config(path("base.cfg"), base->config(), 4, files);

  const auto back = io::load_base(path("base.cfg"));
  EXPECT_EQ(back->config().ilm, base->config().ilm);
  EXPECT_EQ(back->config().rare_pieces, base->config().rare_pieces);
  EXPECT_EQ(back->embeddings(), base->embeddings());
  const Utterance u{"x", {"b", "a", "d"}};
  BaseState s1 = base->init_state(u), s2 = back->init_state(u);
  PieceId prev = base->vocab().bos();
  for (int t = 0; t < 4; ++t) {
    auto r1 = base->step(s1, prev);
    auto r2 = back->step(s2, prev);
    EXPECT_EQ(r1.p_mdl, r2.p_mdl);
    EXPECT_EQ(r1.h_dec, r2.h_dec);
    Eigen::Index arg;
    r1.p_mdl.maxCoeff(&arg);
    prev = static_cast<PieceId>(arg) == base->vocab().eos() ? 0 : static_cast<PieceId>(arg);
    s1 = std::move(r1.next);
    s2 = std::move(r2.next);
  }
}

TEST_F(IoTest, BaseConfigErrors) {
  std::ofstream(path("a.cfg")) << "[base]\nvocab = vocab.txt\n";
  EXPECT_THROW(io::load_base(path("a.cfg")), Error);
  const auto base = testing::tiny_base(3, 2);
  io::write_vocab(path("vocab.txt"), base->vocab());
  io::write_word_list(path("rare_pieces.txt"), {"_zz"});
  io::write_ilm(path("ilm.json"), base->config().ilm);
  io::BaseFiles files;
  files.ilm = "ilm.json";
  io::write_base_config(path("b.cfg"), base->config(), 4, files);
  EXPECT_THROW(io::load_base(path("b.cfg")), Error);
}

TEST_F(IoTest, ReportJsonShape) {
  const std::unordered_map<std::string, WordSet> lists = {{"u", {"b"}}};
  const auto rep = score_corpus({"u"}, {{"a", "b"}}, {{"a", "c", "d"}}, &lists, nullptr);
  const json j = io::report_json(rep, true);
  EXPECT_EQ(j.at("wer").at("errors"), 2);
  EXPECT_EQ(j.at("r_wer").at("rate"), 1.0);
  EXPECT_TRUE(j.at("oov_wer").is_null());
  EXPECT_EQ(io::csv_rate(std::nullopt), "nan");
  EXPECT_EQ(io::csv_rate(Rate{1, 4}), "0.250000");
}

}  // namespace
}  // namespace tcpbias
