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

#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tcpbias/common.hpp"
#include "tcpbias/textproc.hpp"

namespace tcpbias {

/// Wordpiece prefix tree over a biasing list. Node 0 is the root; node
/// numbering is breadth-first with children visited in piece-id order.
class PrefixTree {
 public:
  struct Node {
    std::vector<std::pair<PieceId, int>> children;  // sorted by piece id
    bool is_word_end = false;
    int depth = 0;
  };

  PrefixTree() : nodes_(1) {}

  /// Compiles tokenized words. Every sequence must start with a word-initial
  /// piece followed by continuation pieces.
  static PrefixTree from_sequences(const Vocab& vocab,
                                   std::span<const std::vector<PieceId>> seqs) {
    struct Draft {
      std::map<PieceId, std::unique_ptr<Draft>> kids;
      bool word_end = false;
    };
    Draft root;
    for (const auto& seq : seqs) {
      if (seq.empty()) throw Error("trie: empty piece sequence");
      Draft* at = &root;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const PieceId p = seq[i];
        const bool ok = i == 0 ? vocab.is_word_initial(p) : vocab.is_continuation(p);
        if (!ok) throw Error("trie: malformed piece sequence");
        auto& slot = at->kids[p];
        if (!slot) slot = std::make_unique<Draft>();
        at = slot.get();
      }
      at->word_end = true;
    }

    PrefixTree tree;
    tree.nodes_.clear();
    std::deque<std::pair<const Draft*, int>> queue{{&root, 0}};
    tree.nodes_.push_back(Node{{}, false, 0});
    while (!queue.empty()) {
      auto [draft, index] = queue.front();
      queue.pop_front();
      tree.nodes_[index].is_word_end = draft->word_end;
      for (const auto& [piece, child] : draft->kids) {
        const int child_index = static_cast<int>(tree.nodes_.size());
        tree.nodes_.push_back(Node{{}, false, tree.nodes_[index].depth + 1});
        tree.nodes_[index].children.emplace_back(piece, child_index);
        queue.emplace_back(child.get(), child_index);
      }
    }
    tree.num_words_ = 0;
    for (const auto& n : tree.nodes_) tree.num_words_ += n.is_word_end ? 1 : 0;
    return tree;
  }

  static PrefixTree build(const Vocab& vocab, const std::vector<std::string>& words) {
    std::vector<std::vector<PieceId>> seqs;
    seqs.reserve(words.size());
    for (const auto& w : words) {
      try {
        seqs.push_back(tokenize(vocab, w));
      } catch (const Error&) {
        throw Error("trie: unencodable biasing word '" + w + "'");
      }
    }
    return from_sequences(vocab, seqs);
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  int num_words() const { return num_words_; }
  const Node& node(int index) const { return nodes_.at(index); }

  /// Child reached from `index` by `piece`, or -1.
  int child(int index, PieceId piece) const {
    const auto& kids = nodes_[index].children;
    auto it = std::lower_bound(
        kids.begin(), kids.end(), piece,
        [](const std::pair<PieceId, int>& c, PieceId p) { return c.first < p; });
    return it != kids.end() && it->first == piece ? it->second : -1;
  }

  /// Pre-order rendering, two spaces per depth, '*' marks word ends.
  std::string dump(const Vocab& vocab) const {
    std::ostringstream out;
    dump_node(vocab, 0, out);
    return out.str();
  }

 private:
  void dump_node(const Vocab& vocab, int index, std::ostringstream& out) const {
    const Node& n = nodes_[index];
    if (index == 0) {
      out << "<root>\n";
    }
    for (const auto& [piece, kid] : n.children) {
      const Node& k = nodes_[kid];
      out << std::string(2 * k.depth, ' ') << vocab.piece(piece)
          << (k.is_word_end ? "*" : "") << '\n';
      dump_node(vocab, kid, out);
    }
  }

  std::vector<Node> nodes_;
  int num_words_ = 0;
};

/// Per-hypothesis traversal state: a node index or detached.
struct TrieCursor {
  static constexpr int kDetached = -1;
  int node = 0;

  static TrieCursor root() { return TrieCursor{0}; }
  static TrieCursor detached() { return TrieCursor{kDetached}; }
  bool is_detached() const { return node == kDetached; }
  bool operator==(const TrieCursor&) const = default;
};

namespace detail {
inline bool at_boundary(const PrefixTree& tree, TrieCursor c) {
  return c.is_detached() || c.node == 0 || tree.node(c.node).is_word_end;
}
}  // namespace detail

/// Moves the cursor along `piece`: into a child when one exists, otherwise
/// into a new biasing word when the cursor sits at a word boundary,
/// otherwise off the tree.
inline TrieCursor advance(const PrefixTree& tree, const Vocab& vocab,
                          TrieCursor cursor, PieceId piece) {
  if (piece == vocab.bos() || piece == vocab.ool())
    throw Error("trie: cannot advance on BOS/OOL");
  if (!cursor.is_detached()) {
    if (cursor.node < 0 || cursor.node >= tree.size())
      throw Error("trie: cursor out of range");
    if (int next = tree.child(cursor.node, piece); next >= 0) return {next};
  }
  if (detail::at_boundary(tree, cursor)) {
    if (int next = tree.child(0, piece); next >= 0) return {next};
  }
  return TrieCursor::detached();
}

/// Pieces the biasing head may point at next, ascending. OOL (the largest
/// id) is appended when enabled.
inline std::vector<PieceId> valid_set(const PrefixTree& tree, const Vocab& vocab,
                                      TrieCursor cursor, bool ool_enabled) {
  std::vector<PieceId> out;
  if (!cursor.is_detached() && cursor.node != 0)
    for (const auto& [piece, kid] : tree.node(cursor.node).children)
      out.push_back(piece);
  if (detail::at_boundary(tree, cursor)) {
    const std::size_t mid = out.size();
    for (const auto& [piece, kid] : tree.node(0).children) out.push_back(piece);
    std::inplace_merge(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(mid),
                       out.end());
  }
  if (ool_enabled) out.push_back(vocab.ool());
  return out;
}

}  // namespace tcpbias
