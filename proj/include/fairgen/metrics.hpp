#pragma once

#include "fairgen/policies.hpp"
#include "fairgen/types.hpp"

#include <optional>
#include <vector>

namespace fairgen {

struct ScoredStatement {
  TokenSeq actions;
  Vec per_agent_ppl;
  double eppl = 0.0;  // max of per_agent_ppl
};

// exp(-(mean step log probability)); +inf when any step has zero probability.
double agent_perplexity(const AgentPolicy& policy, const TokenSeq& statement);

// Max over agents of agent_perplexity.
ScoredStatement egalitarian_perplexity(const AgentList& agents, const TokenSeq& statement);

// Mean log probability of the statement's tokens given a growing prefix that
// starts at `context`; -inf when any token has zero probability.
double paraphrase_score(const AgentPolicy& policy, const TokenSeq& context,
                        const TokenSeq& statement);

// Rank correlation with midrank tie handling; nullopt when either input is
// constant.
std::optional<double> spearman(const Vec& x, const Vec& y);

// Per-token log-likelihood differences log pi_user - log pi_ref. Positions
// where either policy assigns zero probability are NaN.
Vec credit_delta(const AgentPolicy& user, const AgentPolicy& reference,
                 const TokenSeq& sequence);

struct CreditProfile {
  Vec delta_x1;
  Vec delta_x2;
  Vec d;  // |delta_x1 - delta_x2|
  Vec z;  // z-scores of d (population standard deviation)
  bool degenerate = false;  // all-zero z because d was constant
};

// The two delta vectors must already be aligned position by position;
// differing multi-token regions are the caller's alignment problem (see
// align_deltas).
CreditProfile credit_zscores(const Vec& delta_x1, const Vec& delta_x2);

// Selects aligned positions from two delta vectors by explicit index maps.
std::pair<Vec, Vec> align_deltas(const Vec& delta_x1, const Vec& delta_x2,
                                 const std::vector<Index>& index_x1,
                                 const std::vector<Index>& index_x2);

}  // namespace fairgen
