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

// On-disk formats. JSON/JSON Lines outputs carry a "meta" object (config
// hash and seeds); plain-text outputs get a "<file>.meta.json" sidecar.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tcpbias/basemodel.hpp"
#include "tcpbias/biaslists.hpp"
#include "tcpbias/decoder.hpp"
#include "tcpbias/rescore.hpp"
#include "tcpbias/score.hpp"
#include "tcpbias/tcpgen.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias::io {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunMeta {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;

  json to_json() const {
    json j;
    j["tool"] = "tcpbias";
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seeds"] = seeds;
    return j;
  }
};

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline void write_sidecar(const fs::path& p, const RunMeta& meta) {
  auto out = open_out(p.string() + ".meta.json");
  out << meta.to_json().dump(2) << '\n';
}

inline std::string read_text(const fs::path& p) {
  auto in = open_in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Each non-empty line parsed as JSON; "meta" header lines are skipped.
inline std::vector<json> read_jsonl(const fs::path& p) {
  auto in = open_in(p);
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("meta") && j.size() == 1) continue;
    rows.push_back(std::move(j));
  }
  return rows;
}

inline void write_meta_line(std::ostream& out, const RunMeta* meta) {
  if (meta) out << json{{"meta", meta->to_json()}}.dump() << '\n';
}

// ---- corpus --------------------------------------------------------------

inline Corpus read_corpus(const fs::path& p, std::string split = {}) {
  Corpus c;
  c.split = std::move(split);
  for (const auto& j : read_jsonl(p)) {
    if (!j.contains("id") || !j.contains("ref"))
      throw Error(p.string() + ": corpus rows need 'id' and 'ref'");
    c.utterances.push_back({j.at("id").get<std::string>(), split_words(j.at("ref").get<std::string>())});
  }
  c.validate();
  return c;
}

inline void write_corpus(const fs::path& p, const Corpus& c, const RunMeta* meta = nullptr) {
  auto out = open_out(p);
  write_meta_line(out, meta);
  for (const auto& u : c.utterances)
    out << json{{"id", u.id}, {"ref", join_words(u.words)}}.dump() << '\n';
}

// ---- vocabulary and word lists -------------------------------------------

inline Vocab read_vocab(const fs::path& p, int d_emb = kDefaultEmbeddingDim) {
  auto in = open_in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3 || lines[lines.size() - 3] != kBosSpelling ||
      lines[lines.size() - 2] != kEosSpelling || lines.back() != kOolSpelling)
    throw Error(p.string() + ": vocabulary must end with <bos>, <eos>, <ool>");
  lines.resize(lines.size() - 3);
  return Vocab(std::move(lines), d_emb);
}

inline void write_vocab(const fs::path& p, const Vocab& v) {
  auto out = open_out(p);
  for (const auto& piece : v.pieces()) out << piece << '\n';
}

inline std::vector<std::string> read_word_list(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto ws = split_words(line);
    if (ws.size() > 1) throw Error(p.string() + ": one word per line expected");
    if (!ws.empty()) words.push_back(ws[0]);
  }
  return words;
}

inline void write_word_list(const fs::path& p, const std::vector<std::string>& words) {
  auto out = open_out(p);
  for (const auto& w : words) out << w << '\n';
}

inline std::vector<BiasingList> read_lists(const fs::path& p) {
  std::vector<BiasingList> lists;
  for (const auto& j : read_jsonl(p)) {
    BiasingList l;
    l.utt_id = j.at("id").get<std::string>();
    l.words = j.at("words").get<std::vector<std::string>>();
    l.num_hits = j.value("hits", std::size_t{0});
    const std::string prov = j.value("provenance", std::string("rare-sim"));
    if (prov == "error-based") l.provenance = ListProvenance::kErrorBased;
    else if (prov == "ontology") l.provenance = ListProvenance::kOntology;
    else if (prov == "frequency") l.provenance = ListProvenance::kFrequency;
    lists.push_back(std::move(l));
  }
  return lists;
}

inline void write_lists(const fs::path& p, const std::vector<BiasingList>& lists,
                        const RunMeta* meta = nullptr) {
  auto out = open_out(p);
  write_meta_line(out, meta);
  for (const auto& l : lists)
    out << json{{"id", l.utt_id},
                {"words", l.words},
                {"hits", l.num_hits},
                {"provenance", provenance_name(l.provenance)}}
               .dump()
        << '\n';
}

// ---- checkpoint ----------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline std::vector<double> flatten(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}
inline std::vector<double> flatten(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline json checkpoint_json(const TcpgenParams& p, const RunMeta* meta = nullptr) {
  json j;
  j["format"] = "tcpgen-checkpoint";
  j["version"] = kCheckpointVersion;
  j["d_emb"] = p.d_emb();
  j["d_dec"] = p.d_dec();
  j["W"] = flatten(p.W);
  j["W1"] = flatten(p.W1);
  j["W2"] = flatten(p.W2);
  j["ool_embedding"] = flatten(p.ool_embedding);
  if (p.key_table) {
    j["key_rows"] = p.key_table->rows();
    j["key_table"] = flatten(*p.key_table);
  }
  if (meta) j["meta"] = meta->to_json();
  return j;
}

inline TcpgenParams checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "tcpgen-checkpoint")
    throw Error("checkpoint: unknown format");
  if (j.value("version", 0) != kCheckpointVersion)
    throw Error("checkpoint: unsupported version");
  const int d_emb = j.at("d_emb").get<int>();
  const int d_dec = j.at("d_dec").get<int>();
  if (d_emb <= 0 || d_dec <= 0) throw Error("checkpoint: invalid dimensions");
  auto load = [&](const char* key, Eigen::Index expect) {
    auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != expect)
      throw Error(std::string("checkpoint: '") + key + "' has " + std::to_string(v.size()) +
                  " values, expected " + std::to_string(expect));
    return v;
  };
  TcpgenParams p = TcpgenParams::zeros(d_emb, d_dec);
  auto w = load("W", static_cast<Eigen::Index>(d_emb) * d_dec);
  std::copy(w.begin(), w.end(), p.W.data());
  auto w1 = load("W1", d_dec);
  std::copy(w1.begin(), w1.end(), p.W1.data());
  auto w2 = load("W2", d_emb);
  std::copy(w2.begin(), w2.end(), p.W2.data());
  auto ool = load("ool_embedding", d_emb);
  std::copy(ool.begin(), ool.end(), p.ool_embedding.data());
  if (j.contains("key_table")) {
    const auto rows = j.at("key_rows").get<Eigen::Index>();
    auto k = load("key_table", rows * d_emb);
    p.key_table = Matrix(rows, d_emb);
    std::copy(k.begin(), k.end(), p.key_table->data());
  }
  return p;
}

inline void write_checkpoint(const fs::path& path, const TcpgenParams& p,
                             const RunMeta* meta = nullptr) {
  auto out = open_out(path);
  out << checkpoint_json(p, meta).dump() << '\n';
}

/// Loads and validates shapes against the model the head will run on.
inline TcpgenParams read_checkpoint(const fs::path& path, const BaseModel& base) {
  TcpgenParams p;
  try {
    p = checkpoint_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  p.validate(base.vocab().d_emb(), base.d_dec(), base.vocab().size());
  return p;
}

// ---- ILM table -------------------------------------------------------------

/// Dense rows as a JSON array of arrays.
inline void write_ilm(const fs::path& p, const Matrix& ilm) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < ilm.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < ilm.cols(); ++c) row.push_back(ilm(r, c));
    rows.push_back(std::move(row));
  }
  auto out = open_out(p);
  out << json{{"format", "ilm-bigram"}, {"size", ilm.rows()}, {"rows", rows}}.dump() << '\n';
}

inline Matrix read_ilm(const fs::path& p) {
  json j;
  try {
    j = json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw Error(p.string() + ": " + e.what());
  }
  const auto n = j.at("size").get<Eigen::Index>();
  const auto& rows = j.at("rows");
  if (static_cast<Eigen::Index>(rows.size()) != n) throw Error(p.string() + ": row count mismatch");
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n) throw Error(p.string() + ": ragged ILM row");
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

// ---- base model config -----------------------------------------------------

/// `key = value` lines under a "[base]" section header; '#' starts a comment.
inline std::map<std::string, std::string> read_kv_section(const fs::path& p,
                                                          const std::string& section) {
  auto in = open_in(p);
  std::map<std::string, std::string> kv;
  std::string line, current;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      current = trim(line.substr(1, line.size() - 2));
      continue;
    }
    if (current != section) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(p.string() + ": expected key = value: " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct BaseFiles {
  std::string vocab = "vocab.txt";
  std::string rare_pieces = "rare_pieces.txt";
  // Either a dense table file or a corpus to estimate it from.
  std::string ilm;
  std::string ilm_corpus;
  double ilm_k = 0.5;
};

inline void write_base_config(const fs::path& p, const SyntheticBaseConfig& c, int d_emb,
                              const BaseFiles& files) {
  auto out = open_out(p);
  out << "[base]\n";
  out << "vocab = " << files.vocab << '\n';
  out << "d_emb = " << d_emb << '\n';
  out << "d_dec = " << c.d_dec << '\n';
  out << "acc_common = " << json(c.acc_common).dump() << '\n';
  out << "acc_rare = " << json(c.acc_rare).dump() << '\n';
  out << "snr = " << json(c.snr).dump() << '\n';
  out << "seed = " << c.seed << '\n';
  out << "rare_pieces = " << files.rare_pieces << '\n';
  if (!files.ilm.empty()) out << "ilm = " << files.ilm << '\n';
  if (!files.ilm_corpus.empty()) {
    out << "ilm_corpus = " << files.ilm_corpus << '\n';
    out << "ilm_k = " << json(files.ilm_k).dump() << '\n';
  }
}

/// Reads a base config; relative paths resolve against the config's folder.
inline std::shared_ptr<const SyntheticBase> load_base(const fs::path& cfg_path) {
  const auto kv = read_kv_section(cfg_path, "base");
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error(cfg_path.string() + ": missing '" + k + "'");
    return it->second;
  };
  const fs::path dir = cfg_path.parent_path();
  auto resolve = [&](const std::string& s) {
    fs::path q(s);
    return q.is_absolute() ? q : dir / q;
  };
  try {
    Vocab vocab = read_vocab(resolve(get("vocab")), std::stoi(get("d_emb")));
    SyntheticBaseConfig c;
    c.d_dec = std::stoi(get("d_dec"));
    c.acc_common = std::stod(get("acc_common"));
    c.acc_rare = std::stod(get("acc_rare"));
    c.snr = std::stod(get("snr"));
    c.seed = std::stoull(get("seed"));
    if (kv.contains("ilm")) {
      c.ilm = read_ilm(resolve(get("ilm")));
    } else if (kv.contains("ilm_corpus")) {
      c.ilm = estimate_ilm(vocab, read_corpus(resolve(get("ilm_corpus"))),
                           kv.contains("ilm_k") ? std::stod(get("ilm_k")) : 0.5);
    } else {
      throw Error(cfg_path.string() + ": needs 'ilm' or 'ilm_corpus'");
    }
    for (const auto& piece : read_word_list(resolve(get("rare_pieces")))) {
      auto id = vocab.find(piece);
      if (!id) throw Error(cfg_path.string() + ": rare piece not in vocabulary: " + piece);
      c.rare_pieces.push_back(*id);
    }
    return std::make_shared<const SyntheticBase>(std::move(vocab), std::move(c));
  } catch (const std::invalid_argument&) {
    throw Error(cfg_path.string() + ": malformed number");
  } catch (const std::out_of_range&) {
    throw Error(cfg_path.string() + ": number out of range");
  }
}

// ---- decodes -----------------------------------------------------------------

inline json hypothesis_json(const Vocab& vocab, const Hypothesis& h) {
  json j;
  j["text"] = join_words(detokenize(vocab, h.pieces));
  json pieces = json::array();
  for (PieceId p : h.pieces) pieces.push_back(vocab.piece(p));
  j["pieces"] = std::move(pieces);
  j["logp"] = h.logp;
  if (!h.gen_trace.empty()) j["gen_trace"] = h.gen_trace;
  return j;
}

inline void write_nbest(const fs::path& p, const Vocab& vocab, const std::vector<NBestList>& lists,
                        const RunMeta* meta = nullptr) {
  auto out = open_out(p);
  write_meta_line(out, meta);
  for (const auto& l : lists) {
    json hyps = json::array();
    for (const auto& h : l.hyps) hyps.push_back(hypothesis_json(vocab, h));
    out << json{{"id", l.utt_id}, {"hyps", hyps}}.dump() << '\n';
  }
}

inline std::vector<NBestList> read_nbest(const fs::path& p, const Vocab& vocab) {
  std::vector<NBestList> lists;
  for (const auto& j : read_jsonl(p)) {
    NBestList l;
    l.utt_id = j.at("id").get<std::string>();
    for (const auto& hj : j.at("hyps")) {
      Hypothesis h;
      for (const auto& s : hj.at("pieces")) {
        const auto piece = s.get<std::string>();
        auto id = vocab.find(piece);
        if (!id) {
          if (piece == kEosSpelling) id = vocab.eos();
          else throw Error(p.string() + ": unknown piece " + piece);
        }
        h.pieces.push_back(*id);
      }
      h.logp = hj.at("logp").get<double>();
      h.finished = !h.pieces.empty() && h.pieces.back() == vocab.eos();
      if (hj.contains("gen_trace")) h.gen_trace = hj.at("gen_trace").get<std::vector<double>>();
      l.hyps.push_back(std::move(h));
    }
    l.nbest = static_cast<int>(l.hyps.size());
    lists.push_back(std::move(l));
  }
  return lists;
}

inline void write_rescored(const fs::path& p, const Vocab& vocab,
                           const std::vector<RescoredList>& lists, const LambdaPair& lambdas,
                           const RunMeta* meta = nullptr) {
  auto out = open_out(p);
  if (meta) {
    json m = meta->to_json();
    m["lambda_ilm"] = lambdas.ilm;
    m["lambda_ext"] = lambdas.ext;
    out << json{{"meta", m}}.dump() << '\n';
  }
  for (const auto& l : lists) {
    json hyps = json::array();
    for (const auto& s : l.hyps) {
      json hj = hypothesis_json(vocab, s.hyp);
      hj["ilm"] = s.ilm;
      hj["ext"] = s.ext;
      hj["total"] = s.total;
      hyps.push_back(std::move(hj));
    }
    out << json{{"id", l.utt_id}, {"hyps", hyps}}.dump() << '\n';
  }
}

/// Top hypothesis words per utterance id from an N-best/rescored file, or
/// the 'ref' field of a corpus file.
inline std::map<std::string, std::vector<std::string>> read_hypotheses(const fs::path& p) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& j : read_jsonl(p)) {
    const auto id = j.at("id").get<std::string>();
    std::vector<std::string> words;
    if (j.contains("hyps")) {
      if (!j.at("hyps").empty()) words = split_words(j.at("hyps").at(0).at("text").get<std::string>());
    } else if (j.contains("ref")) {
      words = split_words(j.at("ref").get<std::string>());
    } else {
      throw Error(p.string() + ": rows need 'hyps' or 'ref'");
    }
    out[id] = std::move(words);
  }
  return out;
}

// ---- reports ---------------------------------------------------------------

inline json rate_json(const Rate& r) {
  json j;
  j["errors"] = r.errors;
  j["ref_tokens"] = r.ref_tokens;
  if (auto v = r.rate()) j["rate"] = *v;
  else j["rate"] = nullptr;
  if (r.infinite()) j["infinite"] = true;
  return j;
}

inline json report_json(const ScoreReport& r, bool verbose, const RunMeta* meta = nullptr) {
  json j;
  if (meta) j["meta"] = meta->to_json();
  j["wer"] = rate_json(r.wer);
  j["r_wer"] = r.r_wer ? rate_json(*r.r_wer) : json(nullptr);
  j["oov_wer"] = r.oov_wer ? rate_json(*r.oov_wer) : json(nullptr);
  json utts = json::array();
  for (const auto& u : r.utterances) {
    json uj;
    uj["id"] = u.utt_id;
    uj["errors"] = u.alignment.errors();
    uj["ref_tokens"] = u.alignment.ref_tokens();
    uj["sub"] = u.alignment.subs;
    uj["ins"] = u.alignment.ins;
    uj["del"] = u.alignment.dels;
    if (r.r_wer) uj["r_wer"] = rate_json(u.biased);
    if (r.oov_wer) uj["oov_wer"] = rate_json(u.oov);
    if (verbose) {
      json ops = json::array();
      for (const auto& op : u.alignment.ops)
        ops.push_back({edit_op_name(op.op), op.ref ? json(*op.ref) : json(nullptr),
                       op.hyp ? json(*op.hyp) : json(nullptr)});
      uj["ops"] = std::move(ops);
    }
    utts.push_back(std::move(uj));
  }
  j["utterances"] = std::move(utts);
  return j;
}

inline std::string csv_rate(const std::optional<Rate>& r) {
  if (!r || !r->rate()) return "nan";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << *r->rate();
  return s.str();
}

}  // namespace tcpbias::io
