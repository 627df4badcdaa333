#pragma once

#include "fairgen/types.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairgen {

struct TreeConfig {
  int branching = 3;                     // B candidates per token position
  int max_depth = 4;                     // maximum statement length in tokens
  int chunk_size = 1;                    // tokens per macro action (1 = token level)
  std::optional<Token> terminal_action;  // end-of-sequence token, if any

  void validate() const;
};

// Proposes the ordered candidate action set at a prefix state. Actions are
// one or more tokens; proposals must be deterministic per state.
class ActionProposer {
 public:
  virtual ~ActionProposer() = default;
  virtual std::vector<TokenSeq> propose(const TokenSeq& prefix) const = 0;
  virtual bool terminal(const TokenSeq& prefix) const = 0;
};

class TreeBuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TreeInconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Finite generation tree. Nodes are prefix states, edges carry the action
// (token run) taken from the parent, leaves are complete statements in
// depth-first order (lexicographic in local candidate indices).
class TokenTree {
 public:
  struct Node {
    Index parent = -1;
    TokenSeq action;  // edge label from the parent; empty at the root
    TokenSeq prefix;  // full token path from the root
    std::vector<Index> children;
    Index leaf_index = -1;  // >= 0 iff this node is a leaf
  };

  Index root() const { return 0; }
  Index node_count() const { return static_cast<Index>(nodes_.size()); }
  const Node& node(Index id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Index leaf_count() const { return static_cast<Index>(leaves_.size()); }
  Index leaf_node(Index leaf) const { return leaves_[static_cast<std::size_t>(leaf)]; }
  const TokenSeq& leaf_path(Index leaf) const { return node(leaf_node(leaf)).prefix; }

  int depth_in_actions() const;  // longest root-to-leaf edge count

  friend TokenTree build_tree(const ActionProposer& proposer, const TreeConfig& config);

 private:
  std::vector<Node> nodes_;
  std::vector<Index> leaves_;
};

TokenTree build_tree(const ActionProposer& proposer, const TreeConfig& config);

// Maps every leaf of `chunked` to the leaf of `full` with the same token
// path. Throws TreeInconsistencyError when a chunked leaf has no counterpart.
std::vector<Index> chunked_leaf_subset(const TokenTree& full, const TokenTree& chunked);

// Total lottery mass below each node, one bottom-up pass.
Vec subtree_masses(const TokenTree& tree, const Vec& lottery);

// --- Proposers -------------------------------------------------------------

// Tokens 0..B-1 at every position, fixed depth, no terminal action.
class FixedAlphabetProposer final : public ActionProposer {
 public:
  FixedAlphabetProposer(int branching, int depth);
  std::vector<TokenSeq> propose(const TokenSeq& prefix) const override;
  bool terminal(const TokenSeq& prefix) const override;

 private:
  int branching_;
  int depth_;
};

// Trie over an explicit set of complete paths. The path set must be
// prefix-free; candidates are the distinct next tokens in ascending order.
class FixedPathProposer final : public ActionProposer {
 public:
  explicit FixedPathProposer(std::vector<TokenSeq> paths);
  std::vector<TokenSeq> propose(const TokenSeq& prefix) const override;
  bool terminal(const TokenSeq& prefix) const override;
  const std::vector<TokenSeq>& paths() const { return paths_; }

 private:
  std::vector<TokenSeq> paths_;  // sorted
};

// Groups a token-level base proposer into chunks of up to `chunk_size`
// tokens. With sample_count == 0 all chunk continuations are enumerated;
// otherwise `sample_count` chunks are drawn per state from a generator seeded
// by (seed, state), and increasing sample_count only extends the drawn set.
class ChunkedProposer final : public ActionProposer {
 public:
  ChunkedProposer(std::shared_ptr<const ActionProposer> base, int chunk_size,
                  int sample_count = 0, std::uint64_t seed = 0);
  std::vector<TokenSeq> propose(const TokenSeq& prefix) const override;
  bool terminal(const TokenSeq& prefix) const override;

 private:
  std::shared_ptr<const ActionProposer> base_;
  int chunk_size_;
  int sample_count_;
  std::uint64_t seed_;
};

// Full B-ary synthetic tree of depth L with chunked macro actions.
TokenTree build_synthetic_tree(int branching, int depth, int chunk_size = 1);

// --- Dump format ------------------------------------------------------------
// One leaf per line: leaf index, then the leaf's tokens, tab-separated.

void write_tree_dump(std::ostream& out, const TokenTree& tree);
TokenTree read_tree_dump(std::istream& in);

std::string format_prefix(const TokenSeq& prefix);  // dotted tokens, "-" if empty

}  // namespace fairgen
