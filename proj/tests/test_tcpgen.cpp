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

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tcpbias/gradcheck.hpp"
#include "tcpbias/pipeline.hpp"
#include "tcpbias/tcpgen.hpp"
#include "tcpbias/train.hpp"

namespace tcpbias {
namespace {

oracle::Rows rows_of(const Matrix& m) {
  oracle::Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}
std::vector<double> vec_of(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void expect_near(const Vector& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(static_cast<std::size_t>(got.size()), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[static_cast<Eigen::Index>(i)], want[i], tol) << i;
}

// Three ordinary pieces, d_emb = d_dec = 2, hand-set parameters.
struct HandFixture {
  Vocab v{{"_a", "_b", "c"}, 2};
  Matrix emb = Matrix(6, 2);
  TcpgenParams p = TcpgenParams::zeros(2, 2);
  Vector h = Vector(2);
  Vector p_mdl = Vector(6);

  HandFixture() {
    emb << 0.9, -0.3,  //
        0.2, 0.8,      //
        -0.5, 0.4,     //
        0.0, 0.0,      // bos
        0.3, 0.3,      // eos
        0.0, 0.0;      // ool row is unused
    p.W << 1.0, -0.5,  //
        0.3, 0.8;
    p.W1 << 0.2, -0.1;
    p.W2 << 0.5, 0.4;
    p.ool_embedding << 0.1, -0.2;
    h << 0.7, 0.4;
    p_mdl << 0.5, 0.2, 0.1, 0.0, 0.2, 0.0;
  }
};

TEST(TcpgenStep, HandFixtureMatchesStraightLineOracle) {
  HandFixture f;
  for (bool ool : {false, true}) {
    std::vector<PieceId> valid = {0, 1};
    if (ool) valid.push_back(f.v.ool());
    StepOptions o;
    o.ool_enabled = ool;
    const StepOutput s = tcpgen_step(f.p, f.h, valid, f.emb, f.p_mdl, f.v.ool(), o);
    const auto want = oracle::step(rows_of(f.p.W), vec_of(f.p.W1), vec_of(f.p.W2), vec_of(f.p.ool_embedding),
                                   rows_of(f.emb), vec_of(f.h), std::vector<int>(valid.begin(), valid.end()),
                                   f.v.ool(), vec_of(f.p_mdl));
    // W h = (0.7 - 0.2, 0.21 + 0.32)
    EXPECT_NEAR(s.q[0], 0.5, 1e-15);
    EXPECT_NEAR(s.q[1], 0.53, 1e-15);
    expect_near(s.q, want.q, 1e-14);
    expect_near(s.p_ptr, want.p_ptr, 1e-14);
    expect_near(s.h_ptr, want.h_ptr, 1e-14);
    expect_near(s.p_final, want.p_final, 1e-14);
    EXPECT_NEAR(s.gate, want.gate, 1e-14);
    EXPECT_NEAR(s.p_gen, want.p_gen, 1e-14);
    EXPECT_EQ(s.p_ptr[2], 0.0);
    EXPECT_NEAR(s.p_final.sum(), 1.0, 1e-12);
  }
}

TEST(TcpgenStep, GateZeroReturnsBaseDistribution) {
  HandFixture f;
  StepOptions o;
  o.gate_override = 0.0;
  const std::vector<PieceId> valid = {0, 2, f.v.ool()};
  const StepOutput s = tcpgen_step(f.p, f.h, valid, f.emb, f.p_mdl, f.v.ool(), o);
  for (int y = 0; y < 6; ++y) EXPECT_EQ(s.p_final[y], f.p_mdl[y]);
  EXPECT_EQ(s.p_gen, 0.0);
}

TEST(TcpgenStep, GateOneWithoutOolReturnsPointer) {
  HandFixture f;
  StepOptions o;
  o.ool_enabled = false;
  o.gate_override = 1.0;
  const std::vector<PieceId> valid = {0, 2};
  const StepOutput s = tcpgen_step(f.p, f.h, valid, f.emb, f.p_mdl, f.v.ool(), o);
  for (int y = 0; y < 6; ++y) EXPECT_EQ(s.p_final[y], s.p_ptr[y]);
}

TEST(TcpgenStep, SingleValidPieceIsOneHot) {
  HandFixture f;
  StepOptions o;
  o.ool_enabled = false;
  const std::vector<PieceId> valid = {1};
  const StepOutput s = tcpgen_step(f.p, f.h, valid, f.emb, f.p_mdl, f.v.ool(), o);
  EXPECT_EQ(s.p_ptr[1], 1.0);
  EXPECT_EQ(s.p_ptr.sum(), 1.0);
  EXPECT_EQ(s.h_ptr, Vector(f.emb.row(1).transpose()));
}

TEST(TcpgenStep, EmptyValidSetBypasses) {
  HandFixture f;
  StepOptions o;
  o.ool_enabled = false;
  const StepOutput s = tcpgen_step(f.p, f.h, {}, f.emb, f.p_mdl, f.v.ool(), o);
  EXPECT_EQ(s.p_final, f.p_mdl);
  EXPECT_EQ(s.p_gen, 0.0);
}

TEST(TcpgenStep, ShapeAndInputErrors) {
  HandFixture f;
  const std::vector<PieceId> valid = {0};
  EXPECT_THROW(tcpgen_step(f.p, Vector::Zero(3), valid, f.emb, f.p_mdl, f.v.ool()), Error);
  EXPECT_THROW(tcpgen_step(f.p, f.h, valid, f.emb, Vector::Zero(5), f.v.ool()), Error);
  Vector bad = f.h;
  bad[0] = std::nan("");
  EXPECT_THROW(tcpgen_step(f.p, bad, valid, f.emb, f.p_mdl, f.v.ool()), Error);
  StepOptions off;
  off.ool_enabled = false;
  const std::vector<PieceId> with_ool = {0, f.v.ool()};
  EXPECT_THROW(tcpgen_step(f.p, f.h, with_ool, f.emb, f.p_mdl, f.v.ool(), off), Error);
  EXPECT_THROW(f.p.validate(2, 3, 6), Error);
}

TEST(TcpgenStep, RandomStepsKeepDistributionsValid) {
  SplitMix64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto pb = random_gradcheck_problem(derive_seed(31, trial), trial % 3 == 0);
    const int V = static_cast<int>(pb.embeddings.rows());
    const auto& seq = pb.batch[0];
    Vector p_mdl(V);
    for (int y = 0; y < V; ++y) p_mdl[y] = y == pb.ool ? 0.0 : rng.uniform();
    p_mdl /= p_mdl.sum();
    const StepOutput s = tcpgen_step(pb.params, seq.h_dec[0], seq.valid[0], pb.embeddings, p_mdl, pb.ool);
    std::vector<bool> in(static_cast<std::size_t>(V), false);
    for (PieceId j : seq.valid[0]) in[static_cast<std::size_t>(j)] = true;
    for (int y = 0; y < V; ++y) {
      if (!in[static_cast<std::size_t>(y)]) {
        ASSERT_EQ(s.p_ptr[y], 0.0);
      }
    }
    EXPECT_LE(std::abs(s.p_final.sum() - 1.0), 1e-9);
    EXPECT_GE(s.p_gen, 0.0);
    EXPECT_LE(s.p_gen, s.gate);
    EXPECT_LE(s.gate, 1.0);
  }
}

TEST(SequenceNll, ClosedForms) {
  const int V = 7, L = 5;
  std::vector<StepOutput> outs(L);
  std::vector<PieceId> targets(L, 3);
  for (auto& o : outs) o.p_final = Vector::Constant(V, 1.0 / V);
  EXPECT_NEAR(sequence_nll(outs, targets), L * std::log(static_cast<double>(V)), 1e-12);
  for (auto& o : outs) {
    o.p_final = Vector::Zero(V);
    o.p_final[3] = 1.0;
  }
  EXPECT_EQ(sequence_nll(outs, targets), 0.0);
  outs[2].p_final[3] = 0.0;
  try {
    sequence_nll(outs, targets);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
  EXPECT_THROW(sequence_nll(outs, std::vector<PieceId>(L - 1, 0)), Error);
}

TEST(SequenceNll, MatchesIndependentSum) {
  SplitMix64 rng(11);
  std::vector<StepOutput> outs(20);
  std::vector<PieceId> targets;
  double want = 0.0;
  for (auto& o : outs) {
    o.p_final = Vector(9);
    double z = 0.0;
    for (int y = 0; y < 9; ++y) z += (o.p_final[y] = 0.01 + rng.uniform());
    o.p_final /= z;
    const PieceId t = static_cast<PieceId>(rng.below(9));
    targets.push_back(t);
    want += -std::log(o.p_final[t]);
  }
  EXPECT_NEAR(sequence_nll(outs, targets), want, 1e-12);
}

TEST(Backward, ZeroAtCertainTarget) {
  HandFixture f;
  StepOptions o;
  o.ool_enabled = false;
  TrainingSequence s;
  s.h_dec = {f.h, f.h};
  s.valid = {{1}, {0}};
  s.p_target = {1.0, 1.0};
  s.targets = {1, 0};
  const auto lg = backward(f.p, std::span<const TrainingSequence>(&s, 1), f.emb, f.v.ool(), o);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_TRUE(lg.grad.W.isZero(0.0));
  EXPECT_TRUE(lg.grad.W1.isZero(0.0));
  EXPECT_TRUE(lg.grad.W2.isZero(0.0));
  EXPECT_TRUE(lg.grad.ool_embedding.isZero(0.0));
}

TEST(Backward, LossMatchesForwardAndFiniteDifferences) {
  const auto pb = random_gradcheck_problem(5, false);
  const auto lg = backward(pb.params, pb.batch, pb.embeddings, pb.ool);
  EXPECT_NEAR(lg.loss, batch_loss(pb.params, pb.batch, pb.embeddings, pb.ool), 1e-12);

  GradcheckOptions opt;
  opt.configs = 4;
  const auto report = gradient_check(opt);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(Backward, GateOverrideFreezesGateWeights) {
  const auto pb = random_gradcheck_problem(9, false);
  StepOptions o;
  o.gate_override = 0.3;
  const auto lg = backward(pb.params, pb.batch, pb.embeddings, pb.ool, o);
  EXPECT_TRUE(lg.grad.W1.isZero(0.0));
  EXPECT_TRUE(lg.grad.W2.isZero(0.0));
  EXPECT_FALSE(lg.grad.W.isZero(0.0));
}

TEST(Schedule, TriStageShape) {
  TriStageSchedule s(100, 1e-3);
  EXPECT_EQ(s.warmup_steps(), 10);
  EXPECT_EQ(s.hold_steps(), 40);
  for (long i = 1; i < 10; ++i) EXPECT_GT(s.lr(i), s.lr(i - 1));
  EXPECT_DOUBLE_EQ(s.lr(0), 1e-4);
  EXPECT_DOUBLE_EQ(s.lr(9), 1e-3);
  for (long i = 10; i < 50; ++i) EXPECT_EQ(s.lr(i), 1e-3);
  EXPECT_DOUBLE_EQ(s.lr(75), 1e-3 * (1.0 - 25.0 / 50.0));
  EXPECT_EQ(s.lr(100), 0.0);
  for (long i = 51; i < 100; ++i)
    EXPECT_NEAR(s.lr(i - 1) - s.lr(i), 1e-3 / 50.0, 1e-15);
}

TEST(Adam, FirstTwoStepsMatchHandFormula) {
  TcpgenParams p = TcpgenParams::zeros(1, 1);
  p.W(0, 0) = 1.0;
  Adam adam(p);
  Gradients g = Gradients::zeros_like(p);
  g.W(0, 0) = 0.5;
  adam.step(p, g, 0.1);
  // m_hat = g, v_hat = g^2
  EXPECT_NEAR(p.W(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  g.W(0, 0) = -0.2;
  adam.step(p, g, 0.1);
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * -0.2;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.04;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.W(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-14);
  EXPECT_EQ(p.W1[0], 0.0);  // zero gradient leaves a parameter in place
}

TEST(Params, InitIsSeededWithClosedGate) {
  const auto a = TcpgenParams::init(8, 6, 3);
  const auto b = TcpgenParams::init(8, 6, 3);
  EXPECT_EQ(a.W, b.W);
  EXPECT_EQ(a.ool_embedding, b.ool_embedding);
  EXPECT_TRUE(a.W1.isZero(0.0));
  EXPECT_TRUE(a.W2.isZero(0.0));
  EXPECT_NE(a.W, TcpgenParams::init(8, 6, 4).W);
}

BenchmarkConfig small_benchmark() {
  BenchmarkConfig c;
  c.synth.n_common = 60;
  c.synth.n_rare = 300;
  c.synth.n_train = 120;
  c.synth.n_dev = 20;
  c.synth.n_test = 30;
  c.synth.n_lm = 2000;
  c.vocab_size = 200;
  c.d_emb = 16;
  c.d_dec = 16;
  return c;
}

TEST(Train, ZeroEpochsLeavesParamsUntouched) {
  const Benchmark b = prepare_benchmark(small_benchmark());
  const auto full = full_rare_list(word_freq(b.data.train), 60);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto init = TcpgenParams::init(16, 16, 1);
  const auto r = train(init, b.data.train, b.data.dev, *b.base, full, cfg);
  EXPECT_EQ(r.params.W, init.W);
  EXPECT_EQ(r.params.ool_embedding, init.ool_embedding);
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, LossFallsAndRunsRepeat) {
  const Benchmark b = prepare_benchmark(small_benchmark());
  const auto full = full_rare_list(word_freq(b.data.train), 60);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.distractors = 30;
  const auto init = TcpgenParams::init(16, 16, 1);
  const auto r1 = train(init, b.data.train, b.data.dev, *b.base, full, cfg);
  const auto r2 = train(init, b.data.train, b.data.dev, *b.base, full, cfg);
  ASSERT_EQ(r1.log.size(), 4u);
  EXPECT_LT(r1.log.back().train_loss, r1.initial_train_loss);
  EXPECT_EQ(r1.params.W, r2.params.W);
  EXPECT_EQ(r1.params.W1, r2.params.W1);
  EXPECT_EQ(r1.params.W2, r2.params.W2);
  EXPECT_EQ(r1.log.back().dev_loss, r2.log.back().dev_loss);
}

TEST(Train, TrainableKeysStartFromBaseEmbeddings) {
  const Benchmark b = prepare_benchmark(small_benchmark());
  const auto full = full_rare_list(word_freq(b.data.train), 60);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.distractors = 10;
  cfg.train_keys = true;
  const auto r = train(TcpgenParams::init(16, 16, 1), b.data.train, b.data.dev, *b.base, full, cfg);
  ASSERT_TRUE(r.params.key_table.has_value());
  EXPECT_NE(*r.params.key_table, b.base->embeddings());
  EXPECT_EQ(r.params.key_table->rows(), b.base->embeddings().rows());
}

}  // namespace
}  // namespace tcpbias
