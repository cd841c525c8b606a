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

// Tree-constrained pointer generator head.
//
// One step, given the frozen decoder state h_dec and the tree-valid pieces:
//
//   q       = ReLU(W h_dec)
//   p_ptr   = softmax over valid of (q . k_j) / sqrt(d_emb)   (0 elsewhere)
//   h_ptr   = sum_j p_ptr(j) v_j             keys == values == embeddings
//   g       = sigmoid(W1 . h_dec + W2 . h_ptr)
//   p_gen   = g * (1 - p_ptr(OOL))            (g when OOL is disabled)
//   p_final = p_mdl * (1 - p_gen) + p_ptr / (1 - p_ptr(OOL)) * p_gen
//
// The OOL key is a trainable vector; every other key is an embedding row.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tcpbias/common.hpp"

namespace tcpbias {

struct TcpgenParams {
  Matrix W;               // d_emb x d_dec
  Vector W1;              // d_dec
  Vector W2;              // d_emb
  Vector ool_embedding;   // d_emb
  // Trainable copy of the key/value table; when absent the frozen base
  // embeddings are used.
  std::optional<Matrix> key_table;

  int d_emb() const { return static_cast<int>(W.rows()); }
  int d_dec() const { return static_cast<int>(W.cols()); }
  double scale() const { return 1.0 / std::sqrt(static_cast<double>(d_emb())); }

  static TcpgenParams zeros(int d_emb, int d_dec) {
    TcpgenParams p;
    p.W = Matrix::Zero(d_emb, d_dec);
    p.W1 = Vector::Zero(d_dec);
    p.W2 = Vector::Zero(d_emb);
    p.ool_embedding = Vector::Zero(d_emb);
    return p;
  }

  /// W ~ N(0, 1/d_dec), gate weights zero, OOL key ~ N(0, 0.01).
  static TcpgenParams init(int d_emb, int d_dec, std::uint64_t seed) {
    TcpgenParams p = zeros(d_emb, d_dec);
    SplitMix64 rng(derive_seed(seed, 0x7c9a));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d_dec));
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = w_std * normal(rng);
    for (Eigen::Index i = 0; i < p.ool_embedding.size(); ++i)
      p.ool_embedding[i] = 0.1 * normal(rng);
    return p;
  }

  void validate(int expect_d_emb, int expect_d_dec, int vocab_size) const {
    if (d_emb() != expect_d_emb || d_dec() != expect_d_dec)
      throw Error("tcpgen: parameter shape " + std::to_string(d_emb()) + "x" +
                  std::to_string(d_dec()) + " does not match model " +
                  std::to_string(expect_d_emb) + "x" + std::to_string(expect_d_dec));
    if (W1.size() != d_dec() || W2.size() != d_emb() || ool_embedding.size() != d_emb())
      throw Error("tcpgen: inconsistent gate/OOL shapes");
    if (key_table && (key_table->rows() != vocab_size || key_table->cols() != d_emb()))
      throw Error("tcpgen: key table shape mismatch");
    if (!all_finite(W) || !all_finite(W1) || !all_finite(W2) || !all_finite(ool_embedding) ||
        (key_table && !all_finite(*key_table)))
      throw Error("tcpgen: non-finite parameter");
  }
};

struct StepOptions {
  bool ool_enabled = true;
  // Replaces the raw gate g (before OOL scaling); used for ablations/tests.
  std::optional<double> gate_override;
};

/// Everything one step computes; kept compact over the valid pieces so the
/// backward pass can reuse it.
struct Attention {
  std::vector<PieceId> valid;
  Vector u;        // W h_dec
  Vector q;        // ReLU(u)
  Vector probs;    // p_ptr over `valid`
  Vector h_ptr;
  double gate = 0.0;      // raw g
  double ool_mass = 0.0;  // p_ptr(OOL)
  double p_gen = 0.0;
  int ool_slot = -1;
  bool bypass = false;
};

struct StepOutput {
  Vector q;
  Vector p_ptr;    // over the whole vocabulary (OOL included)
  Vector h_ptr;
  double gate = 0.0;
  double p_gen = 0.0;
  Vector p_final;  // over the whole vocabulary
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline const Matrix& keys_of(const TcpgenParams& params, const Matrix& embeddings) {
  return params.key_table ? *params.key_table : embeddings;
}

}  // namespace detail

/// Masked attention and gate. `valid` must be ascending.
inline Attention attend(const TcpgenParams& params, const Vector& h_dec,
                        std::span<const PieceId> valid, const Matrix& embeddings,
                        PieceId ool, const StepOptions& opts) {
  if (h_dec.size() != params.d_dec())
    throw Error("tcpgen: h_dec has size " + std::to_string(h_dec.size()) +
                ", expected " + std::to_string(params.d_dec()));
  if (embeddings.cols() != params.d_emb())
    throw Error("tcpgen: embedding width does not match parameters");
  if (!all_finite(h_dec)) throw Error("tcpgen: non-finite h_dec");

  const Matrix& keys = detail::keys_of(params, embeddings);
  Attention a;
  a.valid.assign(valid.begin(), valid.end());
  a.u = params.W * h_dec;
  a.q = a.u.cwiseMax(0.0);
  a.h_ptr = Vector::Zero(params.d_emb());
  if (a.valid.empty()) {
    a.bypass = true;
    return a;
  }

  const auto n = static_cast<Eigen::Index>(a.valid.size());
  Vector logits(n);
  const double scale = params.scale();
  for (Eigen::Index k = 0; k < n; ++k) {
    const PieceId j = a.valid[k];
    if (j == ool) {
      if (!opts.ool_enabled) throw Error("tcpgen: OOL in valid set while disabled");
      a.ool_slot = static_cast<int>(k);
      logits[k] = scale * a.q.dot(params.ool_embedding);
    } else {
      if (j < 0 || j >= keys.rows()) throw Error("tcpgen: valid piece out of range");
      logits[k] = scale * a.q.dot(keys.row(j).transpose());
    }
  }
  const double mx = logits.maxCoeff();
  a.probs = (logits.array() - mx).exp().matrix();
  a.probs /= a.probs.sum();

  for (Eigen::Index k = 0; k < n; ++k) {
    const PieceId j = a.valid[k];
    if (j == ool)
      a.h_ptr += a.probs[k] * params.ool_embedding;
    else
      a.h_ptr += a.probs[k] * keys.row(j).transpose();
  }

  a.gate = opts.gate_override ? *opts.gate_override
                              : detail::sigmoid(params.W1.dot(h_dec) + params.W2.dot(a.h_ptr));
  a.ool_mass = a.ool_slot >= 0 ? a.probs[a.ool_slot] : 0.0;
  a.p_gen = opts.ool_enabled ? a.gate * (1.0 - a.ool_mass) : a.gate;
  return a;
}

/// Biased probability of a single piece; the same arithmetic as the full
/// distribution in tcpgen_step.
inline double final_probability(const Attention& a, double p_mdl_y, PieceId y) {
  if (a.bypass) return p_mdl_y;
  double result = p_mdl_y * (1.0 - a.p_gen);
  if (a.p_gen > 0.0) {
    auto it = std::lower_bound(a.valid.begin(), a.valid.end(), y);
    if (it != a.valid.end() && *it == y && static_cast<int>(it - a.valid.begin()) != a.ool_slot) {
      const double hat = a.probs[it - a.valid.begin()] / (1.0 - a.ool_mass);
      result += hat * a.p_gen;
    }
  }
  return result;
}

inline StepOutput tcpgen_step(const TcpgenParams& params, const Vector& h_dec,
                              std::span<const PieceId> valid, const Matrix& embeddings,
                              const Vector& p_mdl, PieceId ool, const StepOptions& opts = {}) {
  if (p_mdl.size() != embeddings.rows())
    throw Error("tcpgen: p_mdl size does not match vocabulary");
  if (!all_finite(p_mdl)) throw Error("tcpgen: non-finite p_mdl");

  Attention a = attend(params, h_dec, valid, embeddings, ool, opts);
  StepOutput out;
  out.q = a.q;
  out.h_ptr = a.h_ptr;
  out.p_ptr = Vector::Zero(p_mdl.size());
  if (a.bypass) {
    out.gate = 0.0;
    out.p_gen = 0.0;
    out.p_final = p_mdl;
    return out;
  }
  for (std::size_t k = 0; k < a.valid.size(); ++k) out.p_ptr[a.valid[k]] = a.probs[k];
  out.gate = a.gate;
  out.p_gen = a.p_gen;
  out.p_final = p_mdl * (1.0 - a.p_gen);
  if (a.p_gen > 0.0) {
    const double renorm = 1.0 - a.ool_mass;
    for (std::size_t k = 0; k < a.valid.size(); ++k) {
      if (static_cast<int>(k) == a.ool_slot) continue;
      out.p_final[a.valid[k]] += a.probs[k] / renorm * a.p_gen;
    }
  }
  return out;
}

/// Teacher-forced negative log-likelihood, natural log.
inline double sequence_nll(std::span<const StepOutput> outputs,
                           std::span<const PieceId> targets) {
  if (outputs.size() != targets.size())
    throw Error("sequence_nll: " + std::to_string(outputs.size()) + " outputs vs " +
                std::to_string(targets.size()) + " targets");
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const PieceId t = targets[i];
    if (t < 0 || t >= outputs[i].p_final.size())
      throw Error("sequence_nll: target out of range at step " + std::to_string(i));
    const double p = outputs[i].p_final[t];
    if (!(p > 0.0))
      throw Error("sequence_nll: zero probability for target at step " + std::to_string(i));
    loss -= std::log(p);
  }
  return loss;
}

/// One teacher-forced sequence with the frozen base quantities it needs.
/// Only p_mdl at the target enters the loss, so that is all that is kept.
struct TrainingSequence {
  std::vector<Vector> h_dec;
  std::vector<std::vector<PieceId>> valid;
  std::vector<double> p_target;
  std::vector<PieceId> targets;

  std::size_t size() const { return targets.size(); }
};

struct Gradients {
  Matrix W;
  Vector W1;
  Vector W2;
  Vector ool_embedding;
  std::optional<Matrix> key_table;

  static Gradients zeros_like(const TcpgenParams& p) {
    Gradients g;
    g.W = Matrix::Zero(p.W.rows(), p.W.cols());
    g.W1 = Vector::Zero(p.W1.size());
    g.W2 = Vector::Zero(p.W2.size());
    g.ool_embedding = Vector::Zero(p.ool_embedding.size());
    if (p.key_table) g.key_table = Matrix::Zero(p.key_table->rows(), p.key_table->cols());
    return g;
  }
};

struct LossAndGradients {
  double loss = 0.0;  // mean sequence NLL over the batch
  Gradients grad;
};

namespace detail {

inline void check_sequence(const TrainingSequence& s) {
  const std::size_t n = s.targets.size();
  if (s.h_dec.size() != n || s.valid.size() != n || s.p_target.size() != n)
    throw Error("training sequence: inconsistent lengths");
}

inline double step_probability(const Attention& a, double p_t, PieceId target) {
  return final_probability(a, p_t, target);
}

}  // namespace detail

/// Mean sequence NLL, forward only.
inline double batch_loss(const TcpgenParams& params, std::span<const TrainingSequence> batch,
                         const Matrix& embeddings, PieceId ool, const StepOptions& opts = {}) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& seq : batch) {
    detail::check_sequence(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      Attention a = attend(params, seq.h_dec[i], seq.valid[i], embeddings, ool, opts);
      const double pf = detail::step_probability(a, seq.p_target[i], seq.targets[i]);
      if (!(pf > 0.0))
        throw Error("batch_loss: zero probability for target at step " + std::to_string(i));
      total -= std::log(pf);
    }
  }
  return total / static_cast<double>(batch.size());
}

/// Analytic gradients of the mean sequence NLL with respect to the head's
/// parameters. Base-model quantities (h_dec, p_mdl) are inputs only.
inline LossAndGradients backward(const TcpgenParams& params,
                                 std::span<const TrainingSequence> batch,
                                 const Matrix& embeddings, PieceId ool,
                                 const StepOptions& opts = {}) {
  if (batch.empty()) throw Error("backward: empty batch");
  LossAndGradients out;
  out.grad = Gradients::zeros_like(params);
  Gradients& g = out.grad;
  const Matrix& keys = detail::keys_of(params, embeddings);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double scale = params.scale();
  const bool learn_gate = !opts.gate_override.has_value();

  Vector dq(params.d_emb());
  Vector dh_ptr(params.d_emb());
  for (const auto& seq : batch) {
    detail::check_sequence(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const Attention a = attend(params, seq.h_dec[i], seq.valid[i], embeddings, ool, opts);
      const PieceId target = seq.targets[i];
      const double p_t = seq.p_target[i];
      const double pf = detail::step_probability(a, p_t, target);
      if (!(pf > 0.0))
        throw Error("backward: zero probability for target at step " + std::to_string(i));
      out.loss -= std::log(pf) * inv_batch;
      if (a.bypass) continue;

      // p_final(t) = p_t * (1 - g (1 - o)) + g * p_ptr(t)
      const double d_pf = -inv_batch / pf;
      const auto n = static_cast<Eigen::Index>(a.valid.size());
      int target_slot = -1;
      if (auto it = std::lower_bound(a.valid.begin(), a.valid.end(), target);
          it != a.valid.end() && *it == target)
        target_slot = static_cast<int>(it - a.valid.begin());
      const double ptr_t = target_slot >= 0 ? a.probs[target_slot] : 0.0;
      const double o = a.ool_mass;

      Vector dprob = Vector::Zero(n);
      if (target_slot >= 0) dprob[target_slot] += d_pf * a.gate;
      if (a.ool_slot >= 0) dprob[a.ool_slot] += d_pf * p_t * a.gate;

      dh_ptr.setZero();
      if (learn_gate) {
        const double d_gate = d_pf * (ptr_t - p_t * (1.0 - o));
        const double dz = d_gate * a.gate * (1.0 - a.gate);
        g.W1 += dz * seq.h_dec[i];
        g.W2 += dz * a.h_ptr;
        dh_ptr = dz * params.W2;
      }

      // h_ptr = sum_k probs[k] * value_k
      for (Eigen::Index k = 0; k < n; ++k) {
        const PieceId j = a.valid[k];
        if (j == ool) {
          dprob[k] += dh_ptr.dot(params.ool_embedding);
          g.ool_embedding += a.probs[k] * dh_ptr;
        } else {
          dprob[k] += dh_ptr.dot(keys.row(j).transpose());
          if (g.key_table) g.key_table->row(j) += a.probs[k] * dh_ptr.transpose();
        }
      }

      // softmax, then logits = scale * q . key
      const double mean = a.probs.dot(dprob);
      dq.setZero();
      for (Eigen::Index k = 0; k < n; ++k) {
        const double dlogit = a.probs[k] * (dprob[k] - mean);
        if (dlogit == 0.0) continue;
        const PieceId j = a.valid[k];
        if (j == ool) {
          dq += scale * dlogit * params.ool_embedding;
          g.ool_embedding += scale * dlogit * a.q;
        } else {
          dq += scale * dlogit * keys.row(j).transpose();
          if (g.key_table) g.key_table->row(j) += scale * dlogit * a.q.transpose();
        }
      }
      const Vector du = (a.u.array() > 0.0).select(dq, 0.0);
      g.W.noalias() += du * seq.h_dec[i].transpose();
    }
  }

  if (!all_finite(g.W)) throw Error("backward: non-finite gradient for W");
  if (!all_finite(g.W1)) throw Error("backward: non-finite gradient for W1");
  if (!all_finite(g.W2)) throw Error("backward: non-finite gradient for W2");
  if (!all_finite(g.ool_embedding))
    throw Error("backward: non-finite gradient for ool_embedding");
  if (g.key_table && !all_finite(*g.key_table))
    throw Error("backward: non-finite gradient for key_table");
  return out;
}

/// Linear tri-stage learning rate: warm up from 0, hold at the peak, then
/// decay linearly to 0.
class TriStageSchedule {
 public:
  TriStageSchedule(long total_steps, double peak_lr, double warmup_frac = 0.1,
                   double hold_frac = 0.4)
      : total_(std::max(1L, total_steps)), peak_(peak_lr) {
    warmup_ = static_cast<long>(std::llround(warmup_frac * static_cast<double>(total_)));
    hold_ = static_cast<long>(std::llround(hold_frac * static_cast<double>(total_)));
    hold_ = std::min(hold_, total_ - warmup_);
  }

  double lr(long step) const {
    if (step < warmup_)
      return peak_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
    if (step < warmup_ + hold_) return peak_;
    const long decay = total_ - warmup_ - hold_;
    if (decay <= 0) return peak_;
    const long into = step - warmup_ - hold_;
    return peak_ * std::max(0.0, 1.0 - static_cast<double>(into) / static_cast<double>(decay));
  }

  long total_steps() const { return total_; }
  long warmup_steps() const { return warmup_; }
  long hold_steps() const { return hold_; }

 private:
  long total_;
  double peak_;
  long warmup_ = 0;
  long hold_ = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double peak_lr = 1e-3;
};

class Adam {
 public:
  explicit Adam(const TcpgenParams& like, AdamConfig cfg = {})
      : cfg_(cfg), m_(Gradients::zeros_like(like)), v_(Gradients::zeros_like(like)) {}

  void step(TcpgenParams& params, const Gradients& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    update(params.W.data(), grad.W.data(), m_.W.data(), v_.W.data(), params.W.size(), lr, c1, c2);
    update(params.W1.data(), grad.W1.data(), m_.W1.data(), v_.W1.data(), params.W1.size(), lr, c1, c2);
    update(params.W2.data(), grad.W2.data(), m_.W2.data(), v_.W2.data(), params.W2.size(), lr, c1, c2);
    update(params.ool_embedding.data(), grad.ool_embedding.data(), m_.ool_embedding.data(),
           v_.ool_embedding.data(), params.ool_embedding.size(), lr, c1, c2);
    if (params.key_table) {
      if (!grad.key_table) throw Error("adam: missing key table gradient");
      update(params.key_table->data(), grad.key_table->data(), m_.key_table->data(),
             v_.key_table->data(), params.key_table->size(), lr, c1, c2);
    }
  }

  long steps_taken() const { return t_; }

 private:
  void update(double* p, const double* g, double* m, double* v, Eigen::Index n, double lr,
              double c1, double c2) const {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }

  AdamConfig cfg_;
  Gradients m_;
  Gradients v_;
  long t_ = 0;
};

}  // namespace tcpbias
