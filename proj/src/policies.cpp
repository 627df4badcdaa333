#include "fairgen/policies.hpp"

#include <cmath>
#include <stdexcept>

namespace fairgen {

void RewardConfig::validate() const {
  if (!(beta > 0)) throw std::invalid_argument("RewardConfig: beta must be positive");
}

UniformPolicy::UniformPolicy(int branching, int depth)
    : branching_(branching), depth_(depth) {
  if (branching < 1 || depth < 1)
    throw std::invalid_argument("UniformPolicy: branching and depth must be >= 1");
}

std::vector<Token> UniformPolicy::enabled_tokens(const TokenSeq& prefix) const {
  if (static_cast<int>(prefix.size()) >= depth_)
    throw std::out_of_range("UniformPolicy: prefix at or beyond depth");
  std::vector<Token> tokens(static_cast<std::size_t>(branching_));
  for (std::size_t a = 0; a < tokens.size(); ++a) tokens[a] = static_cast<Token>(a);
  return tokens;
}

Vec UniformPolicy::action_distribution(const TokenSeq& prefix) const {
  if (static_cast<int>(prefix.size()) >= depth_)
    throw std::out_of_range("UniformPolicy: prefix at or beyond depth");
  return Vec::Constant(branching_, 1.0 / static_cast<double>(branching_));
}

double step_prob(const AgentPolicy& policy, const TokenSeq& prefix, Token a) {
  const std::vector<Token> tokens = policy.enabled_tokens(prefix);
  const Vec dist = policy.action_distribution(prefix);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == a) return dist[static_cast<Index>(i)];
  return 0.0;
}

double log_reward(const AgentPolicy& policy, const TokenSeq& prefix, Token a,
                  const RewardConfig& cfg) {
  cfg.validate();
  const double p = step_prob(policy, prefix, a);
  if (p <= 0.0) return kNegInf;
  return cfg.beta * std::log(p);
}

double path_log_utility(const AgentPolicy& policy, const TokenSeq& path,
                        const RewardConfig& cfg) {
  cfg.validate();
  double total = 0.0;
  TokenSeq prefix;
  prefix.reserve(path.size());
  for (Token a : path) {
    const double p = step_prob(policy, prefix, a);
    if (p <= 0.0) return kNegInf;
    total += std::log(p);
    prefix.push_back(a);
  }
  return cfg.beta * total;
}

double path_prob_utility(const AgentPolicy& policy, const TokenSeq& path) {
  double log_total = 0.0;
  TokenSeq prefix;
  prefix.reserve(path.size());
  for (Token a : path) {
    const double p = step_prob(policy, prefix, a);
    if (p <= 0.0) return 0.0;
    log_total += std::log(p);
    prefix.push_back(a);
  }
  if (log_total < kLogUnderflow) return 0.0;
  return std::exp(log_total);
}

std::vector<Index> UtilityMatrix::zero_rows() const {
  std::vector<Index> out;
  for (Index i = 0; i < values.rows(); ++i)
    if (values.row(i).maxCoeff() <= 0.0) out.push_back(i);
  return out;
}

void UtilityMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 1)
    throw std::invalid_argument("UtilityMatrix: empty matrix");
  if ((values.array() < 0.0).any())
    throw std::invalid_argument("UtilityMatrix: negative utility entry");
  if (!agent_ids.empty() && static_cast<Index>(agent_ids.size()) != values.rows())
    throw std::invalid_argument("UtilityMatrix: agent_ids/rows mismatch");
}

namespace {

// Accumulates per-agent log probabilities down the tree; one distribution
// evaluation per (agent, token position) on each root-to-leaf path.
void fill_utilities(const AgentList& agents, const TokenTree& tree, Index node_id,
                    std::vector<double>& agent_logs, Mat& values) {
  const TokenTree::Node& node = tree.node(node_id);
  if (node.leaf_index >= 0) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const double lp = agent_logs[i];
      values(static_cast<Index>(i), node.leaf_index) =
          (lp <= kLogUnderflow) ? 0.0 : std::exp(lp);
    }
    return;
  }
  for (Index child_id : node.children) {
    const TokenTree::Node& child = tree.node(child_id);
    std::vector<double> child_logs = agent_logs;
    TokenSeq prefix = node.prefix;
    for (Token t : child.action) {
      for (std::size_t i = 0; i < agents.size(); ++i) {
        if (child_logs[i] == kNegInf) continue;
        const double p = step_prob(*agents[i], prefix, t);
        child_logs[i] = (p <= 0.0) ? kNegInf : child_logs[i] + std::log(p);
      }
      prefix.push_back(t);
    }
    fill_utilities(agents, tree, child_id, child_logs, values);
  }
}

}  // namespace

UtilityMatrix utility_matrix(const AgentList& agents, const TokenTree& tree) {
  if (agents.empty()) throw std::invalid_argument("utility_matrix: no agents");
  UtilityMatrix out;
  out.values = Mat::Zero(static_cast<Index>(agents.size()), tree.leaf_count());
  out.agent_ids.reserve(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i)
    out.agent_ids.push_back("agent_" + std::to_string(i));
  std::vector<double> logs(agents.size(), 0.0);
  fill_utilities(agents, tree, tree.root(), logs, out.values);
  return out;
}

UtilityMatrix rescale_rows(const UtilityMatrix& matrix) {
  matrix.validate();
  UtilityMatrix out = matrix;
  for (Index i = 0; i < out.values.rows(); ++i) {
    const double row_max = out.values.row(i).maxCoeff();
    if (row_max > 0.0) out.values.row(i) /= row_max;
  }
  return out;
}

}  // namespace fairgen
