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

// Central finite-difference check of the head's analytic gradients on
// small random problems.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tcpbias/common.hpp"
#include "tcpbias/tcpgen.hpp"

namespace tcpbias {

struct GradcheckOptions {
  int configs = 10;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Elements where both gradients are at most this are not compared.
  double min_grad = 1e-8;
  std::uint64_t seed = 17;
};

struct GradcheckEntry {
  int config = 0;
  std::string param;
  long checked = 0;
  long skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// A random problem: embeddings, parameters and a batch of sequences.
struct GradcheckProblem {
  Matrix embeddings;
  PieceId ool = 0;
  TcpgenParams params;
  std::vector<TrainingSequence> batch;
  StepOptions opts;
};

inline GradcheckProblem random_gradcheck_problem(std::uint64_t seed, bool with_keys) {
  SplitMix64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gauss = [&] { return normal(rng); };

  GradcheckProblem pb;
  const int d_emb = 3 + static_cast<int>(rng.below(6));
  const int d_dec = 3 + static_cast<int>(rng.below(6));
  const int V = 6 + static_cast<int>(rng.below(8));
  pb.ool = V - 1;
  pb.embeddings = Matrix(V, d_emb);
  for (Eigen::Index i = 0; i < pb.embeddings.size(); ++i) pb.embeddings.data()[i] = gauss();

  pb.params = TcpgenParams::zeros(d_emb, d_dec);
  for (Eigen::Index i = 0; i < pb.params.W.size(); ++i) pb.params.W.data()[i] = gauss();
  for (Eigen::Index i = 0; i < d_dec; ++i) pb.params.W1[i] = 0.5 * gauss();
  for (Eigen::Index i = 0; i < d_emb; ++i) pb.params.W2[i] = 0.5 * gauss();
  for (Eigen::Index i = 0; i < d_emb; ++i) pb.params.ool_embedding[i] = gauss();
  if (with_keys) {
    Matrix k(V, d_emb);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = gauss();
    pb.params.key_table = k;
  }

  const int n_seq = 2 + static_cast<int>(rng.below(2));
  for (int s = 0; s < n_seq; ++s) {
    TrainingSequence seq;
    const int len = 3 + static_cast<int>(rng.below(4));
    for (int i = 0; i < len; ++i) {
      Vector h(d_dec);
      for (int j = 0; j < d_dec; ++j) h[j] = gauss();
      std::vector<PieceId> valid;
      for (PieceId p = 0; p < V - 1; ++p)
        if (rng.uniform() < 0.4) valid.push_back(p);
      if (rng.uniform() < 0.8) valid.push_back(pb.ool);
      const PieceId target = static_cast<PieceId>(rng.below(static_cast<std::uint64_t>(V - 1)));
      seq.h_dec.push_back(std::move(h));
      seq.valid.push_back(std::move(valid));
      seq.p_target.push_back(0.05 + 0.9 * rng.uniform());
      seq.targets.push_back(target);
    }
    pb.batch.push_back(std::move(seq));
  }
  return pb;
}

namespace detail {

inline void check_block(const std::function<double()>& loss, double* values, const double* analytic,
                        Eigen::Index n, const GradcheckOptions& opt, GradcheckEntry& entry) {
  for (Eigen::Index i = 0; i < n; ++i) {
    const double saved = values[i];
    values[i] = saved + opt.step;
    const double up = loss();
    values[i] = saved - opt.step;
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double denom = std::max(std::abs(numeric), std::abs(analytic[i]));
    entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    if (denom <= opt.min_grad) {
      ++entry.skipped;
      continue;
    }
    entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    ++entry.checked;
  }
}

}  // namespace detail

/// Checks every parameter element; key tables are included on odd configs.
inline GradcheckReport gradient_check(const GradcheckOptions& opt) {
  if (opt.configs <= 0) throw Error("gradcheck: need at least one configuration");
  if (!(opt.step > 0.0)) throw Error("gradcheck: step must be positive");
  GradcheckReport report;
  for (int c = 0; c < opt.configs; ++c) {
    GradcheckProblem pb = random_gradcheck_problem(derive_seed(opt.seed, 0x9c, c), c % 2 == 1);
    const LossAndGradients lg = backward(pb.params, pb.batch, pb.embeddings, pb.ool, pb.opts);
    auto loss = [&] { return batch_loss(pb.params, pb.batch, pb.embeddings, pb.ool, pb.opts); };
    auto run = [&](const char* name, double* values, const double* analytic, Eigen::Index n) {
      GradcheckEntry e;
      e.config = c;
      e.param = name;
      detail::check_block(loss, values, analytic, n, opt, e);
      report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
      if (!(e.max_rel_error < opt.tolerance)) report.passed = false;
      report.entries.push_back(e);
    };
    run("W", pb.params.W.data(), lg.grad.W.data(), pb.params.W.size());
    run("W1", pb.params.W1.data(), lg.grad.W1.data(), pb.params.W1.size());
    run("W2", pb.params.W2.data(), lg.grad.W2.data(), pb.params.W2.size());
    run("ool_embedding", pb.params.ool_embedding.data(), lg.grad.ool_embedding.data(),
        pb.params.ool_embedding.size());
    if (pb.params.key_table)
      run("key_table", pb.params.key_table->data(), lg.grad.key_table->data(),
          pb.params.key_table->size());
  }
  return report;
}

}  // namespace tcpbias
