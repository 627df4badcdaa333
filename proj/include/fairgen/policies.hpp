#pragma once

#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fairgen {

struct RewardConfig {
  double beta = 1.0;  // > 0

  void validate() const;
};

// An agent's next-token preference model. Implementations must be safe for
// concurrent read-only evaluation.
class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;

  // Tokens available at `prefix`, in the same order as action_distribution.
  virtual std::vector<Token> enabled_tokens(const TokenSeq& prefix) const = 0;

  // Probability of each enabled token; nonnegative, sums to 1 within 1e-9.
  virtual Vec action_distribution(const TokenSeq& prefix) const = 0;
};

using AgentList = std::vector<std::shared_ptr<const AgentPolicy>>;

// Uniform next-token policy over a fixed alphabet; the reference sampler for
// synthetic runs.
class UniformPolicy final : public AgentPolicy {
 public:
  UniformPolicy(int branching, int depth);
  std::vector<Token> enabled_tokens(const TokenSeq& prefix) const override;
  Vec action_distribution(const TokenSeq& prefix) const override;

 private:
  int branching_;
  int depth_;
};

// pi(a | prefix); 0 when `a` is not enabled at `prefix`.
double step_prob(const AgentPolicy& policy, const TokenSeq& prefix, Token a);

// beta * log pi(a | prefix); -inf when the step has zero probability.
double log_reward(const AgentPolicy& policy, const TokenSeq& prefix, Token a,
                  const RewardConfig& cfg = {});

// Sum of log rewards along `path`; -inf when any step has zero probability.
double path_log_utility(const AgentPolicy& policy, const TokenSeq& path,
                        const RewardConfig& cfg = {});

// Joint probability of `path` under the policy, accumulated in log space.
double path_prob_utility(const AgentPolicy& policy, const TokenSeq& path);

struct UtilityMatrix {
  Mat values;  // n x m, values(i, j) = agent i's joint probability of leaf j
  std::vector<std::string> agent_ids;

  Index agents() const { return values.rows(); }
  Index leaves() const { return values.cols(); }
  std::vector<Index> zero_rows() const;  // agents with no positive leaf utility
  void validate() const;
};

// U[i][j] = path_prob_utility(agent i, leaf j), evaluated in one tree walk.
UtilityMatrix utility_matrix(const AgentList& agents, const TokenTree& tree);

// Per-agent rescaling so each row's maximum is 1; all-zero rows are kept.
UtilityMatrix rescale_rows(const UtilityMatrix& matrix);

}  // namespace fairgen
