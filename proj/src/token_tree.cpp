#include "fairgen/token_tree.hpp"

#include "fairgen/hashing.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace fairgen {

void TreeConfig::validate() const {
  if (branching < 1) throw std::invalid_argument("TreeConfig: branching must be >= 1");
  if (max_depth < 1) throw std::invalid_argument("TreeConfig: max_depth must be >= 1");
  if (chunk_size < 1) throw std::invalid_argument("TreeConfig: chunk_size must be >= 1");
  if (chunk_size > max_depth)
    throw std::invalid_argument("TreeConfig: chunk_size must not exceed max_depth");
}

std::string format_prefix(const TokenSeq& prefix) {
  if (prefix.empty()) return "-";
  std::ostringstream out;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i > 0) out << '.';
    out << prefix[i];
  }
  return out.str();
}

namespace {

bool is_leaf_state(const ActionProposer& proposer, const TreeConfig& config,
                   const TokenSeq& prefix) {
  if (static_cast<int>(prefix.size()) >= config.max_depth) return true;
  if (config.terminal_action && !prefix.empty() && prefix.back() == *config.terminal_action)
    return true;
  return proposer.terminal(prefix);
}

// Truncates a proposed action at the depth limit and just past a terminal
// token; returns the usable token run.
TokenSeq clip_action(const TokenSeq& action, const TreeConfig& config,
                     std::size_t prefix_len) {
  TokenSeq out;
  const std::size_t room = static_cast<std::size_t>(config.max_depth) - prefix_len;
  for (Token t : action) {
    if (out.size() == room) break;
    out.push_back(t);
    if (config.terminal_action && t == *config.terminal_action) break;
  }
  return out;
}

}  // namespace

TokenTree build_tree(const ActionProposer& proposer, const TreeConfig& config) {
  config.validate();
  TokenTree tree;
  tree.nodes_.push_back(TokenTree::Node{});

  // Explicit stack, children pushed in reverse so leaves appear in
  // candidate order.
  std::vector<Index> stack{0};
  std::int64_t max_children = 1;
  for (int i = 0; i < config.chunk_size; ++i) max_children *= config.branching;

  while (!stack.empty()) {
    const Index id = stack.back();
    stack.pop_back();
    TokenSeq prefix = tree.nodes_[static_cast<std::size_t>(id)].prefix;

    if (is_leaf_state(proposer, config, prefix)) {
      tree.nodes_[static_cast<std::size_t>(id)].leaf_index = tree.leaf_count();
      tree.leaves_.push_back(id);
      continue;
    }

    const std::vector<TokenSeq> proposals = proposer.propose(prefix);
    std::vector<TokenSeq> actions;
    actions.reserve(proposals.size());
    for (const TokenSeq& raw : proposals) {
      if (raw.empty())
        throw TreeBuildError("proposer returned an empty action at prefix " +
                             format_prefix(prefix));
      TokenSeq clipped = clip_action(raw, config, prefix.size());
      if (std::find(actions.begin(), actions.end(), clipped) == actions.end())
        actions.push_back(std::move(clipped));
    }
    if (actions.empty())
      throw TreeBuildError("proposer returned no candidate actions at non-terminal prefix " +
                           format_prefix(prefix));
    if (static_cast<std::int64_t>(actions.size()) > max_children)
      throw TreeBuildError("proposer returned " + std::to_string(actions.size()) +
                           " actions at prefix " + format_prefix(prefix) +
                           ", exceeding branching^chunk_size");

    const Index first_child = tree.node_count();
    for (const TokenSeq& action : actions) {
      TokenTree::Node child;
      child.parent = id;
      child.action = action;
      child.prefix = prefix;
      child.prefix.insert(child.prefix.end(), action.begin(), action.end());
      tree.nodes_[static_cast<std::size_t>(id)].children.push_back(tree.node_count());
      tree.nodes_.push_back(std::move(child));
    }
    for (Index c = tree.node_count() - 1; c >= first_child; --c) stack.push_back(c);
  }
  return tree;
}

int TokenTree::depth_in_actions() const {
  int depth = 0;
  for (Index leaf : leaves_) {
    int edges = 0;
    for (Index id = leaf; node(id).parent >= 0; id = node(id).parent) ++edges;
    depth = std::max(depth, edges);
  }
  return depth;
}

std::vector<Index> chunked_leaf_subset(const TokenTree& full, const TokenTree& chunked) {
  std::map<TokenSeq, Index> by_path;
  for (Index j = 0; j < full.leaf_count(); ++j) by_path.emplace(full.leaf_path(j), j);

  std::vector<Index> mapping;
  mapping.reserve(static_cast<std::size_t>(chunked.leaf_count()));
  for (Index j = 0; j < chunked.leaf_count(); ++j) {
    auto it = by_path.find(chunked.leaf_path(j));
    if (it == by_path.end())
      throw TreeInconsistencyError("chunked leaf " + std::to_string(j) + " (" +
                                   format_prefix(chunked.leaf_path(j)) +
                                   ") has no counterpart in the full tree");
    mapping.push_back(it->second);
  }
  return mapping;
}

Vec subtree_masses(const TokenTree& tree, const Vec& lottery) {
  if (lottery.size() != tree.leaf_count())
    throw std::invalid_argument("subtree_masses: lottery has " +
                                std::to_string(lottery.size()) + " entries for " +
                                std::to_string(tree.leaf_count()) + " leaves");
  Vec mass = Vec::Zero(tree.node_count());
  for (Index j = 0; j < tree.leaf_count(); ++j) mass[tree.leaf_node(j)] = lottery[j];
  for (Index id = tree.node_count() - 1; id > 0; --id)
    mass[tree.node(id).parent] += mass[id];
  return mass;
}

// --- FixedAlphabetProposer ---------------------------------------------------

FixedAlphabetProposer::FixedAlphabetProposer(int branching, int depth)
    : branching_(branching), depth_(depth) {
  if (branching < 1 || depth < 1)
    throw std::invalid_argument("FixedAlphabetProposer: branching and depth must be >= 1");
}

std::vector<TokenSeq> FixedAlphabetProposer::propose(const TokenSeq& prefix) const {
  if (terminal(prefix)) return {};
  std::vector<TokenSeq> out;
  out.reserve(static_cast<std::size_t>(branching_));
  for (Token a = 0; a < branching_; ++a) out.push_back({a});
  return out;
}

bool FixedAlphabetProposer::terminal(const TokenSeq& prefix) const {
  return static_cast<int>(prefix.size()) >= depth_;
}

// --- FixedPathProposer -------------------------------------------------------

FixedPathProposer::FixedPathProposer(std::vector<TokenSeq> paths) : paths_(std::move(paths)) {
  if (paths_.empty()) throw std::invalid_argument("FixedPathProposer: empty path set");
  std::sort(paths_.begin(), paths_.end());
  for (std::size_t i = 0; i + 1 < paths_.size(); ++i) {
    const TokenSeq& a = paths_[i];
    const TokenSeq& b = paths_[i + 1];
    if (a == b) throw std::invalid_argument("FixedPathProposer: duplicate path");
    if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin()))
      throw std::invalid_argument("FixedPathProposer: path set is not prefix-free");
  }
}

std::vector<TokenSeq> FixedPathProposer::propose(const TokenSeq& prefix) const {
  std::vector<TokenSeq> out;
  Token last = -1;
  for (const TokenSeq& path : paths_) {
    if (path.size() <= prefix.size()) continue;
    if (!std::equal(prefix.begin(), prefix.end(), path.begin())) continue;
    const Token next = path[prefix.size()];
    if (out.empty() || next != last) {
      out.push_back({next});
      last = next;
    }
  }
  return out;  // paths_ sorted, so candidates are ascending and distinct
}

bool FixedPathProposer::terminal(const TokenSeq& prefix) const {
  return std::binary_search(paths_.begin(), paths_.end(), prefix);
}

// --- ChunkedProposer ----------------------------------------------------------

ChunkedProposer::ChunkedProposer(std::shared_ptr<const ActionProposer> base, int chunk_size,
                                 int sample_count, std::uint64_t seed)
    : base_(std::move(base)), chunk_size_(chunk_size), sample_count_(sample_count), seed_(seed) {
  if (!base_) throw std::invalid_argument("ChunkedProposer: null base proposer");
  if (chunk_size_ < 1) throw std::invalid_argument("ChunkedProposer: chunk_size must be >= 1");
  if (sample_count_ < 0)
    throw std::invalid_argument("ChunkedProposer: sample_count must be >= 0");
}

std::vector<TokenSeq> ChunkedProposer::propose(const TokenSeq& prefix) const {
  // Enumerate every chunk continuation of up to chunk_size_ base actions.
  std::vector<TokenSeq> chunks;
  std::vector<std::pair<TokenSeq, int>> frontier{{TokenSeq{}, 0}};
  while (!frontier.empty()) {
    auto [chunk, steps] = frontier.back();
    frontier.pop_back();
    if (steps > 0) {
      TokenSeq state = prefix;
      state.insert(state.end(), chunk.begin(), chunk.end());
      if (steps == chunk_size_ || base_->terminal(state)) {
        chunks.push_back(chunk);
        continue;
      }
    }
    TokenSeq state = prefix;
    state.insert(state.end(), chunk.begin(), chunk.end());
    for (const TokenSeq& next : base_->propose(state)) {
      TokenSeq extended = chunk;
      extended.insert(extended.end(), next.begin(), next.end());
      frontier.emplace_back(std::move(extended), steps + 1);
    }
  }
  std::sort(chunks.begin(), chunks.end());

  if (sample_count_ == 0 || static_cast<std::size_t>(sample_count_) >= chunks.size())
    return chunks;

  // First sample_count_ entries of a state-keyed permutation, so a larger
  // sample_count draws a superset.
  std::uint64_t rng = splitmix64(seed_ ^ fnv1a64(prefix));
  std::unordered_map<std::size_t, std::size_t> swapped;
  auto slot = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<TokenSeq> picked;
  picked.reserve(static_cast<std::size_t>(sample_count_));
  const std::size_t n = chunks.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(sample_count_); ++i) {
    rng = splitmix64(rng);
    const std::size_t j = i + static_cast<std::size_t>(rng % (n - i));
    const std::size_t vi = slot(i), vj = slot(j);
    picked.push_back(chunks[vj]);
    swapped[j] = vi;
    swapped[i] = vj;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

bool ChunkedProposer::terminal(const TokenSeq& prefix) const { return base_->terminal(prefix); }

TokenTree build_synthetic_tree(int branching, int depth, int chunk_size) {
  auto base = std::make_shared<FixedAlphabetProposer>(branching, depth);
  TreeConfig config;
  config.branching = branching;
  config.max_depth = depth;
  config.chunk_size = chunk_size;
  if (chunk_size == 1) return build_tree(*base, config);
  ChunkedProposer chunked(base, chunk_size);
  return build_tree(chunked, config);
}

void write_tree_dump(std::ostream& out, const TokenTree& tree) {
  for (Index j = 0; j < tree.leaf_count(); ++j) {
    out << j;
    for (Token t : tree.leaf_path(j)) out << '\t' << t;
    out << '\n';
  }
}

TokenTree read_tree_dump(std::istream& in) {
  std::vector<TokenSeq> paths;
  std::string line;
  Index expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long index = -1;
    if (!(fields >> index) || index != expected)
      throw TreeInconsistencyError("tree dump: bad or out-of-order leaf index in line '" +
                                   line + "'");
    TokenSeq path;
    long long tok;
    while (fields >> tok) path.push_back(static_cast<Token>(tok));
    if (path.empty()) throw TreeInconsistencyError("tree dump: leaf with no tokens");
    paths.push_back(std::move(path));
    ++expected;
  }
  if (paths.empty()) throw TreeInconsistencyError("tree dump: no leaves");

  std::vector<TokenSeq> sorted = paths;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != paths)
    throw TreeInconsistencyError("tree dump: leaves are not in lexicographic order");

  int max_depth = 1;
  for (const TokenSeq& p : paths) max_depth = std::max(max_depth, static_cast<int>(p.size()));
  FixedPathProposer proposer(paths);
  TreeConfig config;
  config.branching = static_cast<int>(paths.size());  // loose bound; trie shapes vary
  config.max_depth = max_depth;
  return build_tree(proposer, config);
}

}  // namespace fairgen
