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

// tcpbias: command-line driver for the contextual biasing toolkit.
//
// Options can also come from an INI-style file given with --config. Keys in
// a "[train]" (etc.) section set that subcommand's options; command-line
// flags take precedence over the file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tcpbias/gradcheck.hpp"
#include "tcpbias/io.hpp"
#include "tcpbias/pipeline.hpp"
#include "tcpbias/rescore.hpp"

namespace fs = std::filesystem;
using namespace tcpbias;
using io::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Options shared by decoding commands.
struct DecodeFlags {
  int beam = 10;
  int nbest = 10;
  int max_len = 64;
  bool no_ool = false;
  bool trace_gen = false;

  void add(CLI::App* app, bool with_trace) {
    app->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--nbest", nbest, "Hypotheses kept per utterance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--max-len", max_len, "Maximum output pieces")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_flag("--no-ool", no_ool, "Drop the out-of-list token from valid sets");
    if (with_trace) app->add_flag("--trace-gen", trace_gen, "Record per-step generation probability");
  }

  DecodeOptions options() const {
    DecodeOptions o;
    o.beam = beam;
    o.nbest = std::min(nbest, beam);
    o.max_len = max_len;
    o.trace_gen = trace_gen;
    o.step.ool_enabled = !no_ool;
    return o;
  }
};

io::RunMeta make_meta(const CLI::App* sub, std::map<std::string, std::uint64_t> seeds) {
  io::RunMeta m;
  m.command = sub->get_name();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(sub->get_name() + "\n" + sub->config_to_str(true, false))));
  m.config_hash = hex;
  m.seeds = std::move(seeds);
  return m;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto out = io::open_out(path);
  out << j.dump(2) << '\n';
}

std::vector<std::vector<std::string>> hyps_in_order(
    const Corpus& refs, const std::map<std::string, std::vector<std::string>>& by_id,
    const std::string& source) {
  std::vector<std::vector<std::string>> out;
  out.reserve(refs.size());
  for (const auto& u : refs.utterances) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) throw Error(source + ": no hypothesis for utterance " + u.id);
    out.push_back(it->second);
  }
  return out;
}

std::string fmt_rate(const std::optional<Rate>& r) {
  if (!r || !r->rate()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f (%ld/%ld)", *r->rate(), r->errors, r->ref_tokens);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-constrained pointer generator biasing toolkit"};
  app.set_config("--config", "", "INI-style key = value file; flags override it");
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads for decode, score and sweep")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  const auto existing = CLI::ExistingFile;

  // ---- build-vocab ----
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Learn a word-piece vocabulary");
  std::string vocab_corpus, vocab_out;
  int vocab_size = 1000;
  vocab_cmd->add_option("--corpus", vocab_corpus, "Training text (JSONL id/ref)")
      ->required()
      ->check(existing);
  vocab_cmd->add_option("--size", vocab_size, "Target number of ordinary pieces")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  vocab_cmd->add_option("--out", vocab_out, "Vocabulary file")->required();

  // ---- synth-data ----
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate the synthetic benchmark");
  BenchmarkConfig bench;
  std::string synth_out;
  synth_cmd->add_option("--out-dir", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", bench.synth.seed, "Corpus seed")->capture_default_str();
  synth_cmd->add_option("--n-common", bench.synth.n_common)->capture_default_str();
  synth_cmd->add_option("--n-rare", bench.synth.n_rare)->capture_default_str();
  synth_cmd->add_option("--n-train", bench.synth.n_train)->capture_default_str();
  synth_cmd->add_option("--n-dev", bench.synth.n_dev)->capture_default_str();
  synth_cmd->add_option("--n-test", bench.synth.n_test)->capture_default_str();
  synth_cmd->add_option("--n-lm", bench.synth.n_lm, "LM text sentences")->capture_default_str();
  synth_cmd->add_option("--rare-fraction", bench.synth.rare_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--vocab-size", bench.vocab_size)->capture_default_str();
  synth_cmd->add_option("--d-emb", bench.d_emb)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--d-dec", bench.d_dec)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--acc-common", bench.acc_common)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--acc-rare", bench.acc_rare)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--snr", bench.snr)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  synth_cmd->add_option("--ilm-k", bench.ilm_k)->capture_default_str();
  synth_cmd->add_option("--base-seed", bench.base_seed)->capture_default_str();

  // ---- extract-error-list ----
  auto* err_cmd = app.add_subcommand("extract-error-list",
                                     "Decode training data and list frequently misrecognised words");
  std::string err_base, err_corpus, err_out;
  DecodeFlags err_flags;
  err_cmd->add_option("--base", err_base, "Base model config")->required()->check(existing);
  err_cmd->add_option("--corpus", err_corpus, "Training corpus")->required()->check(existing);
  err_cmd->add_option("--out", err_out, "Word list output")->required();
  err_flags.add(err_cmd, false);

  // ---- build-lists ----
  auto* lists_cmd = app.add_subcommand("build-lists", "Build the full rare list and per-utterance lists");
  std::string lists_train, lists_full, lists_corpus, lists_out, lists_full_out;
  std::size_t lists_top_k = 300, lists_distractors = 1000;
  std::uint64_t lists_seed = 17;
  bool lists_case = false, lists_global = false;
  auto* train_opt = lists_cmd->add_option("--train", lists_train, "Corpus for word frequencies")
                        ->check(existing);
  auto* full_opt = lists_cmd->add_option("--full", lists_full, "Existing full word list")->check(existing);
  train_opt->excludes(full_opt);
  lists_cmd->add_option("--top-k", lists_top_k, "Most frequent words left out of the full list")
      ->capture_default_str();
  lists_cmd->add_option("--full-out", lists_full_out, "Write the full list here");
  lists_cmd->add_option("--corpus", lists_corpus, "Corpus to build per-utterance lists for")
      ->check(existing);
  lists_cmd->add_option("--distractors", lists_distractors)->capture_default_str();
  lists_cmd->add_option("--seed", lists_seed)->capture_default_str();
  lists_cmd->add_flag("--case-augment", lists_case, "Add capitalised variants");
  lists_cmd->add_flag("--global", lists_global, "Emit the full list as one list for all utterances");
  lists_cmd->add_option("--out", lists_out, "Lists output (JSONL)");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train the biasing head on a frozen base model");
  std::string tr_base, tr_train, tr_dev, tr_full, tr_out, tr_log;
  TrainConfig tcfg;
  std::uint64_t tr_init_seed = 17;
  bool tr_no_ool = false;
  train_cmd->add_option("--base", tr_base)->required()->check(existing);
  train_cmd->add_option("--train", tr_train)->required()->check(existing);
  train_cmd->add_option("--dev", tr_dev)->check(existing);
  train_cmd->add_option("--full-list", tr_full, "Words distractors are drawn from")
      ->required()
      ->check(existing);
  train_cmd->add_option("--epochs", tcfg.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--distractors", tcfg.distractors)->capture_default_str();
  train_cmd->add_option("--lr", tcfg.adam.peak_lr, "Peak learning rate")->capture_default_str();
  train_cmd->add_option("--seed", tcfg.seed, "List sampling and shuffling seed")->capture_default_str();
  train_cmd->add_option("--init-seed", tr_init_seed, "Parameter initialisation seed")
      ->capture_default_str();
  train_cmd->add_flag("--no-ool", tr_no_ool);
  train_cmd->add_flag("--train-keys", tcfg.train_keys, "Learn a separate key table");
  train_cmd->add_option("--out", tr_out, "Checkpoint output")->required();
  train_cmd->add_option("--log", tr_log, "Per-epoch loss log (JSONL)");

  // ---- decode ----
  auto* dec_cmd = app.add_subcommand("decode", "Beam-search decode to N-best lists");
  std::string dec_base, dec_corpus, dec_ckpt, dec_lists, dec_out;
  DecodeFlags dec_flags;
  dec_cmd->add_option("--base", dec_base)->required()->check(existing);
  dec_cmd->add_option("--corpus", dec_corpus)->required()->check(existing);
  auto* ckpt_opt = dec_cmd->add_option("--checkpoint", dec_ckpt, "Biasing head; omit for baseline")
                       ->check(existing);
  auto* dl_opt = dec_cmd->add_option("--lists", dec_lists, "Per-utterance lists (JSONL)")->check(existing);
  ckpt_opt->needs(dl_opt);
  dl_opt->needs(ckpt_opt);
  dec_cmd->add_option("--out", dec_out, "N-best output (JSONL)")->required();
  dec_flags.add(dec_cmd, true);

  // ---- rescore ----
  auto* res_cmd = app.add_subcommand("rescore", "Re-rank N-best lists with ILM subtraction and an external LM");
  std::string res_base, res_nbest, res_lm_text, res_out, res_tune_nbest, res_tune_ref, res_tune_out;
  LambdaPair lambdas;
  double res_lm_k = 0.1, res_step = 0.1;
  res_cmd->add_option("--base", res_base)->required()->check(existing);
  res_cmd->add_option("--nbest", res_nbest)->required()->check(existing);
  res_cmd->add_option("--lm-text", res_lm_text, "Text for the external bigram LM")
      ->required()
      ->check(existing);
  res_cmd->add_option("--lm-k", res_lm_k, "Add-k constant")->capture_default_str();
  auto* li_opt = res_cmd->add_option("--lambda-ilm", lambdas.ilm)
                     ->check(CLI::Range(0.0, 1.0))
                     ->capture_default_str();
  auto* le_opt = res_cmd->add_option("--lambda-ext", lambdas.ext)
                     ->check(CLI::Range(0.0, 1.0))
                     ->capture_default_str();
  auto* tn_opt = res_cmd->add_option("--tune-nbest", res_tune_nbest, "Dev N-best for the grid search")
                     ->check(existing);
  auto* tr_opt = res_cmd->add_option("--tune-ref", res_tune_ref, "Dev references")->check(existing);
  tn_opt->needs(tr_opt);
  tr_opt->needs(tn_opt);
  tn_opt->excludes(li_opt)->excludes(le_opt);
  res_cmd->add_option("--grid-step", res_step)->check(CLI::Range(0.01, 1.0))->capture_default_str();
  res_cmd->add_option("--tune-out", res_tune_out, "Grid search report (JSON)");
  res_cmd->add_option("--out", res_out, "Rescored N-best (JSONL)")->required();

  // ---- score ----
  auto* score_cmd = app.add_subcommand("score", "WER, R-WER and OOV WER");
  std::string sc_ref, sc_hyp, sc_lists, sc_oov_train, sc_oov_words, sc_out;
  bool sc_normalize = false, sc_verbose = false;
  score_cmd->add_option("--ref", sc_ref, "Reference corpus (JSONL id/ref)")->required()->check(existing);
  score_cmd->add_option("--hyp", sc_hyp, "N-best, rescored or corpus JSONL")->required()->check(existing);
  score_cmd->add_option("--lists", sc_lists, "Biasing lists for R-WER")->check(existing);
  auto* ot_opt = score_cmd->add_option("--oov-train", sc_oov_train, "Training corpus defining OOV words")
                     ->check(existing);
  auto* ow_opt = score_cmd->add_option("--oov-words", sc_oov_words, "Explicit OOV word list")->check(existing);
  ot_opt->excludes(ow_opt);
  score_cmd->add_flag("--normalize", sc_normalize, "Lower-case and strip punctuation first");
  score_cmd->add_flag("--verbose", sc_verbose, "Include per-utterance edit operations");
  score_cmd->add_option("--out", sc_out, "Report (JSON); stdout when omitted");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "Score biased decoding across distractor counts");
  std::string sw_base, sw_ckpt, sw_test, sw_train, sw_full, sw_out, sw_base_out;
  std::vector<std::size_t> sw_counts{100, 500, 1000, 2000};
  std::uint64_t sw_seed = 17;
  bool sw_case = false;
  DecodeFlags sw_flags;
  sweep_cmd->add_option("--base", sw_base)->required()->check(existing);
  sweep_cmd->add_option("--checkpoint", sw_ckpt)->required()->check(existing);
  sweep_cmd->add_option("--test", sw_test)->required()->check(existing);
  sweep_cmd->add_option("--train", sw_train, "Training corpus defining OOV words")
      ->required()
      ->check(existing);
  sweep_cmd->add_option("--full-list", sw_full)->required()->check(existing);
  sweep_cmd->add_option("--counts", sw_counts, "Distractor counts")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--seed", sw_seed)->capture_default_str();
  sweep_cmd->add_flag("--case-augment", sw_case);
  sweep_cmd->add_option("--out", sw_out, "Biased CSV")->required();
  sweep_cmd->add_option("--baseline-out", sw_base_out, "Unbiased CSV scored against the same lists");
  sw_flags.add(sweep_cmd, false);

  // ---- gradcheck ----
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  GradcheckOptions gc;
  std::string gc_out;
  gc_cmd->add_option("--configs", gc.configs)->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--step", gc.step)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--out", gc_out, "Report (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*vocab_cmd) {
      const Corpus c = io::read_corpus(vocab_corpus);
      const Vocab v = build_vocab(c, vocab_size);
      io::write_vocab(vocab_out, v);
      io::write_sidecar(vocab_out, make_meta(vocab_cmd, {}));
      std::cout << "vocabulary: " << v.num_pieces() << " pieces + 3 specials\n";

    } else if (*synth_cmd) {
      const Benchmark b = prepare_benchmark(bench);
      const fs::path dir(synth_out);
      const auto meta = make_meta(synth_cmd, {{"seed", bench.synth.seed}, {"base_seed", bench.base_seed}});
      io::write_corpus(dir / "train.jsonl", b.data.train, &meta);
      io::write_corpus(dir / "dev.jsonl", b.data.dev, &meta);
      io::write_corpus(dir / "test.jsonl", b.data.test, &meta);
      io::write_corpus(dir / "lm.jsonl", b.data.lm, &meta);
      io::write_word_list(dir / "common_words.txt", b.data.common_words);
      io::write_word_list(dir / "rare_words.txt", b.data.rare_words);
      io::write_vocab(dir / "vocab.txt", b.base->vocab());
      std::vector<std::string> rare_pieces;
      for (PieceId p = 0; p < b.base->vocab().size(); ++p)
        if (b.base->is_rare(p)) rare_pieces.push_back(b.base->vocab().piece(p));
      io::write_word_list(dir / "rare_pieces.txt", rare_pieces);
      io::BaseFiles files;
      files.ilm_corpus = "train.jsonl";
      files.ilm_k = bench.ilm_k;
      SyntheticBaseConfig bc = make_base_config(bench, b.base->vocab(), b.data);
      io::write_base_config(dir / "base.cfg", bc, bench.d_emb, files);
      for (const char* f : {"common_words.txt", "rare_words.txt", "vocab.txt", "rare_pieces.txt", "base.cfg"})
        io::write_sidecar(dir / f, meta);
      std::cout << "wrote benchmark to " << dir.string() << " (" << b.data.train.size() << " train, "
                << b.data.dev.size() << " dev, " << b.data.test.size() << " test utterances)\n";

    } else if (*err_cmd) {
      const auto base = io::load_base(err_base);
      const Corpus c = io::read_corpus(err_corpus);
      const auto words = extract_error_list(*base, c, err_flags.options(), workers);
      io::write_word_list(err_out, words);
      io::write_sidecar(err_out, make_meta(err_cmd, {}));
      std::cout << "error-based list: " << words.size() << " words\n";

    } else if (*lists_cmd) {
      if (lists_train.empty() && lists_full.empty())
        throw CLI::RequiredError("--train or --full");
      std::vector<std::string> full;
      if (!lists_full.empty()) {
        full = io::read_word_list(lists_full);
      } else {
        full = full_rare_list(word_freq(io::read_corpus(lists_train)), lists_top_k);
      }
      const auto meta = make_meta(lists_cmd, {{"seed", lists_seed}});
      if (!lists_full_out.empty()) {
        io::write_word_list(lists_full_out, full);
        io::write_sidecar(lists_full_out, meta);
      }
      if (!lists_out.empty()) {
        std::vector<BiasingList> lists;
        if (lists_global) {
          BiasingList g;
          g.utt_id = "global";
          g.words = lists_case ? augment_case(full) : full;
          lists.push_back(std::move(g));
        } else {
          if (lists_corpus.empty()) throw CLI::RequiredError("--corpus");
          lists = make_utterance_lists(io::read_corpus(lists_corpus), full, lists_distractors,
                                       lists_seed, lists_case);
        }
        io::write_lists(lists_out, lists, &meta);
      }
      std::cout << "full list: " << full.size() << " words\n";

    } else if (*train_cmd) {
      const auto base = io::load_base(tr_base);
      const Corpus train_c = io::read_corpus(tr_train, "train");
      const Corpus dev_c = tr_dev.empty() ? Corpus{} : io::read_corpus(tr_dev, "dev");
      const auto full = io::read_word_list(tr_full);
      tcfg.step.ool_enabled = !tr_no_ool;
      const auto init = TcpgenParams::init(base->vocab().d_emb(), base->d_dec(), tr_init_seed);
      const TrainResult r = train(init, train_c, dev_c, *base, full, tcfg);
      const auto meta = make_meta(train_cmd, {{"seed", tcfg.seed}, {"init_seed", tr_init_seed}});
      io::write_checkpoint(tr_out, r.params, &meta);
      std::cout << "initial loss train " << r.initial_train_loss << " dev " << r.initial_dev_loss << '\n';
      for (const auto& e : r.log)
        std::cout << "epoch " << e.epoch << " train " << e.train_loss << " dev " << e.dev_loss
                  << " lr " << e.lr << '\n';
      if (!tr_log.empty()) {
        auto out = io::open_out(tr_log);
        io::write_meta_line(out, &meta);
        out << json{{"epoch", 0}, {"train_loss", r.initial_train_loss}, {"dev_loss", r.initial_dev_loss}}.dump()
            << '\n';
        for (const auto& e : r.log)
          out << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_loss", e.dev_loss}, {"lr", e.lr}}
                     .dump()
              << '\n';
      }

    } else if (*dec_cmd) {
      const auto base = io::load_base(dec_base);
      const Corpus c = io::read_corpus(dec_corpus);
      std::optional<TcpgenParams> params;
      std::vector<BiasingList> lists;
      if (!dec_ckpt.empty()) {
        params = io::read_checkpoint(dec_ckpt, *base);
        lists = io::read_lists(dec_lists);
      }
      const auto nbest = decode_corpus(*base, c, params ? &*params : nullptr,
                                       params ? &lists : nullptr, dec_flags.options(), workers);
      const auto meta = make_meta(dec_cmd, {});
      io::write_nbest(dec_out, base->vocab(), nbest, &meta);
      std::cout << "decoded " << nbest.size() << " utterances\n";

    } else if (*res_cmd) {
      const auto base = io::load_base(res_base);
      const ToyLM lm = ToyLM::train(base->vocab(), io::read_corpus(res_lm_text), res_lm_k);
      auto attach = [&](const std::vector<NBestList>& lists) {
        std::vector<RescoredList> out(lists.size());
        parallel_for(lists.size(), workers,
                     [&](std::size_t i) { out[i] = attach_lm_scores(lists[i], lm, *base); });
        return out;
      };
      auto meta = make_meta(res_cmd, {});
      if (!res_tune_nbest.empty()) {
        const Corpus dev_ref = io::read_corpus(res_tune_ref);
        const auto dev_nbest = io::read_nbest(res_tune_nbest, base->vocab());
        std::map<std::string, const NBestList*> by_id;
        for (const auto& n : dev_nbest) by_id[n.utt_id] = &n;
        std::vector<NBestList> ordered;
        std::vector<std::vector<std::string>> refs;
        for (const auto& u : dev_ref.utterances) {
          auto it = by_id.find(u.id);
          if (it == by_id.end()) throw Error("tune: no N-best for utterance " + u.id);
          ordered.push_back(*it->second);
          refs.push_back(u.words);
        }
        const TuneResult t = tune(attach(ordered), refs, base->vocab(), res_step);
        lambdas = t.best;
        std::cout << "tuned lambda_ilm " << lambdas.ilm << " lambda_ext " << lambdas.ext << " dev errors "
                  << t.best_errors << "/" << t.ref_tokens << '\n';
        if (!res_tune_out.empty()) {
          json tj;
          tj["meta"] = meta.to_json();
          tj["lambda_ilm"] = t.best.ilm;
          tj["lambda_ext"] = t.best.ext;
          tj["best_errors"] = t.best_errors;
          tj["ref_tokens"] = t.ref_tokens;
          tj["grid_step"] = res_step;
          tj["grid_errors"] = t.grid_errors;
          write_json(res_tune_out, tj);
        }
      }
      const auto nbest = io::read_nbest(res_nbest, base->vocab());
      auto scored = attach(nbest);
      for (auto& s : scored) s = rerank(std::move(s), lambdas);
      io::write_rescored(res_out, base->vocab(), scored, lambdas, &meta);
      std::cout << "rescored " << scored.size() << " utterances\n";

    } else if (*score_cmd) {
      const Corpus refs = io::read_corpus(sc_ref);
      const auto hyps = hyps_in_order(refs, io::read_hypotheses(sc_hyp), sc_hyp);
      std::vector<BiasingList> lists;
      if (!sc_lists.empty()) lists = io::read_lists(sc_lists);
      std::optional<WordSet> oov;
      if (!sc_oov_train.empty()) oov = oov_words(io::read_corpus(sc_oov_train), refs);
      if (!sc_oov_words.empty()) {
        const auto w = io::read_word_list(sc_oov_words);
        oov = WordSet(w.begin(), w.end());
      }
      const ScoreReport r =
          score_decodes(refs, hyps, sc_lists.empty() ? nullptr : &lists, oov ? &*oov : nullptr, sc_normalize);
      const auto meta = make_meta(score_cmd, {});
      if (!sc_out.empty()) {
        write_json(sc_out, io::report_json(r, sc_verbose, &meta));
        std::cout << "WER " << fmt_rate(r.wer) << "  R-WER " << fmt_rate(r.r_wer) << "  OOV-WER "
                  << fmt_rate(r.oov_wer) << '\n';
      } else {
        write_json("-", io::report_json(r, sc_verbose, &meta));
      }

    } else if (*sweep_cmd) {
      const auto base = io::load_base(sw_base);
      const auto params = io::read_checkpoint(sw_ckpt, *base);
      const Corpus test = io::read_corpus(sw_test);
      const Corpus train_c = io::read_corpus(sw_train);
      const auto full = io::read_word_list(sw_full);
      const auto rows =
          sweep(*base, params, test, train_c, full, sw_counts, sw_seed, sw_flags.options(), workers, sw_case);
      const auto meta = make_meta(sweep_cmd, {{"seed", sw_seed}});
      auto write_csv = [&](const std::string& path, bool biased) {
        auto out = io::open_out(path);
        out << "distractors,wer,r_wer,oov_wer\n";
        for (const auto& row : rows) {
          const ScoreReport& r = biased ? row.biased : row.baseline;
          out << row.distractors << ',' << io::csv_rate(r.wer) << ',' << io::csv_rate(r.r_wer) << ','
              << io::csv_rate(r.oov_wer) << '\n';
        }
        io::write_sidecar(path, meta);
      };
      write_csv(sw_out, true);
      if (!sw_base_out.empty()) write_csv(sw_base_out, false);
      for (const auto& row : rows)
        std::cout << "distractors " << row.distractors << "  R-WER " << fmt_rate(row.biased.r_wer)
                  << "  baseline " << fmt_rate(row.baseline.r_wer) << '\n';

    } else if (*gc_cmd) {
      const GradcheckReport r = gradient_check(gc);
      for (const auto& e : r.entries)
        std::printf("config %2d  %-13s  n=%-4ld  max_rel %.3e  max_abs %.3e\n", e.config, e.param.c_str(),
                    e.checked, e.max_rel_error, e.max_abs_error);
      std::printf("%s: max relative error %.3e (tolerance %.1e)\n", r.passed ? "ok" : "FAILED",
                  r.max_rel_error, gc.tolerance);
      if (!gc_out.empty()) {
        json j;
        j["meta"] = make_meta(gc_cmd, {{"seed", gc.seed}}).to_json();
        j["passed"] = r.passed;
        j["max_rel_error"] = r.max_rel_error;
        json entries = json::array();
        for (const auto& e : r.entries)
          entries.push_back({{"config", e.config},
                             {"param", e.param},
                             {"checked", e.checked},
                             {"max_rel_error", e.max_rel_error},
                             {"max_abs_error", e.max_abs_error}});
        j["entries"] = std::move(entries);
        write_json(gc_out, j);
      }
      if (!r.passed) return kExitRuntime;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
