#pragma once

#include "fairgen/policies.hpp"
#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>

namespace fairgen {

struct SearchConfig {
  int lookahead_depth = 2;  // d, in actions
  int beam_width = 4;       // w
  int branching = 3;        // B (reported; candidates come from the proposer)
  int max_len = 4;          // maximum statement length in tokens
  int n_samples = 4;        // N for best-of-n
  double beta = 1.0;
  Index oracle_cap = 100000;              // leaf limit for exhaustive search
  std::optional<Token> terminal_action;   // ends sampled paths early

  void validate() const;
};

struct SearchResult {
  TokenSeq path;
  Vec per_agent_log_utilities;
  double ew_log = 0.0;
  int zero_prob_steps = 0;  // zero-probability (agent, step) events on the path
  std::string method;
  long expanded_nodes = 0;
};

// min over agents of the path's cumulative log utility; -inf when any agent
// assigns a zero-probability step.
double egalitarian_welfare(const AgentList& agents, const TokenSeq& path, double beta = 1.0);

// Exact argmax of egalitarian welfare over all leaves; ties go to the lowest
// leaf index. Throws when the tree exceeds cfg.oracle_cap leaves.
SearchResult exhaustive_egal_argmax(const TokenTree& tree, const AgentList& agents,
                                    const SearchConfig& cfg);

// Rolling horizon: at each state enumerate the depth-d action frontier, score
// the concatenated paths, and commit the first action of the best one.
SearchResult finite_lookahead(const ActionProposer& proposer, const AgentList& agents,
                              const SearchConfig& cfg);

// Keeps the top-w partial paths by current egalitarian score; terminal paths
// carry forward; returns the best complete path.
SearchResult beam_search(const ActionProposer& proposer, const AgentList& agents,
                         const SearchConfig& cfg);

// Samples cfg.n_samples full paths from `reference` and keeps the best. The
// default objective is the egalitarian log welfare; `score` (higher is
// better) overrides it when the caller ranks by another criterion.
SearchResult best_of_n(const AgentPolicy& reference, const AgentList& agents,
                       const SearchConfig& cfg, std::mt19937_64& rng,
                       const std::function<double(const TokenSeq&)>& score = {});

}  // namespace fairgen
