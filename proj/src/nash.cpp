#include "fairgen/nash.hpp"

#include <algorithm>
#include <cmath>

namespace fairgen {

void SolverConfig::validate() const {
  if (!(epsilon > 0)) throw std::invalid_argument("SolverConfig: epsilon must be positive");
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
  if (!(min_positive > 0))
    throw std::invalid_argument("SolverConfig: min_positive must be positive");
}

void validate_lottery(const Vec& lottery, double sum_tol) {
  if (lottery.size() < 1) throw std::invalid_argument("lottery: empty");
  if ((lottery.array() < -1e-12).any())
    throw std::invalid_argument("lottery: negative weight");
  if (std::abs(lottery.sum() - 1.0) > sum_tol)
    throw std::invalid_argument("lottery: weights do not sum to 1");
}

double nash_welfare(const UtilityMatrix& utilities, const Vec& lottery) {
  if (lottery.size() != utilities.leaves())
    throw std::invalid_argument("nash_welfare: lottery/utility dimension mismatch");
  const Vec expected = utilities.values * lottery;
  if ((expected.array() <= 0.0).any()) return kNegInf;
  return expected.array().log().sum();
}

Vec nash_welfare_gradient(const UtilityMatrix& utilities, const Vec& lottery) {
  const Vec expected = utilities.values * lottery;
  if ((expected.array() <= 0.0).any())
    throw std::invalid_argument("nash_welfare_gradient: nonpositive expected utility");
  return utilities.values.transpose() * expected.cwiseInverse();
}

namespace {

Index argmax_lowest(const Vec& v) {
  Index best = 0;
  for (Index j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

}  // namespace

NashSolution maximize_nash_welfare(const UtilityMatrix& utilities, const SolverConfig& cfg) {
  cfg.validate();
  utilities.validate();
  const Index n = utilities.agents();
  const Index m = utilities.leaves();
  for (Index i = 0; i < n; ++i)
    if (utilities.values.row(i).maxCoeff() <= 0.0)
      throw PositivityError("maximize_nash_welfare: agent " + std::to_string(i) +
                                " has no positive leaf utility",
                            i);

  NashSolution out;
  Vec p = Vec::Constant(m, 1.0 / static_cast<double>(m));
  Vec expected = utilities.values * p;
  double objective = expected.array().log().sum();
  if (cfg.record_trace) out.trace.push_back(objective);

  for (int k = 1; k <= cfg.max_iters; ++k) {
    out.iterations = k;
    if (expected.minCoeff() < cfg.min_positive)
      throw PositivityError("maximize_nash_welfare: expected utility fell below floor", -1);

    const Vec grad = utilities.values.transpose() * expected.cwiseInverse();
    const Index vertex = argmax_lowest(grad);
    const double gap = grad[vertex] - grad.dot(p);
    out.gap = gap;
    if (gap <= cfg.epsilon) {
      out.converged = true;
      break;
    }

    const Vec vertex_expected = utilities.values.col(vertex);
    double gamma = 2.0 / (k + 2.0);
    double candidate_objective = kNegInf;
    Vec candidate_expected;
    bool stepped = false;
    for (int halving = 0; halving < 60; ++halving) {
      candidate_expected = (1.0 - gamma) * expected + gamma * vertex_expected;
      if (candidate_expected.minCoeff() > 0.0) {
        candidate_objective = candidate_expected.array().log().sum();
        if (candidate_objective >= objective) {
          stepped = true;
          break;
        }
      }
      gamma *= 0.5;
    }
    if (!stepped) break;  // gap > epsilon but no improving step at this scale

    p *= (1.0 - gamma);
    p[vertex] += gamma;
    expected = utilities.values * p;
    objective = expected.array().log().sum();
    if (cfg.record_trace) out.trace.push_back(objective);
  }

  out.lottery = p;
  out.log_nash_welfare = objective;
  if (!out.converged) {
    const Vec grad = utilities.values.transpose() * expected.cwiseInverse();
    out.gap = grad.maxCoeff() - grad.dot(p);
    out.converged = out.gap <= cfg.epsilon;
  }
  return out;
}

InducedPolicy induce_policy(const TokenTree& tree, const Vec& lottery) {
  validate_lottery(lottery);
  if (lottery.size() != tree.leaf_count())
    throw std::invalid_argument("induce_policy: lottery/leaf count mismatch");

  Vec truncated = (lottery.array() < 1e-12).select(Vec::Zero(lottery.size()), lottery);
  const double total = truncated.sum();
  if (total <= 0.0) throw std::invalid_argument("induce_policy: lottery vanished");
  truncated /= total;

  InducedPolicy out;
  out.node_mass = subtree_masses(tree, truncated);
  out.action_probs.resize(static_cast<std::size_t>(tree.node_count()));
  for (Index id = 0; id < tree.node_count(); ++id) {
    const TokenTree::Node& node = tree.node(id);
    Vec probs = Vec::Zero(static_cast<Index>(node.children.size()));
    const double mass = out.node_mass[id];
    if (mass > 0.0)
      for (std::size_t c = 0; c < node.children.size(); ++c)
        probs[static_cast<Index>(c)] = out.node_mass[node.children[c]] / mass;
    out.action_probs[static_cast<std::size_t>(id)] = std::move(probs);
  }
  return out;
}

Vec policy_leaf_distribution(const TokenTree& tree, const InducedPolicy& policy) {
  if (static_cast<Index>(policy.action_probs.size()) != tree.node_count())
    throw std::invalid_argument("policy_leaf_distribution: policy/tree mismatch");
  Vec reach = Vec::Zero(tree.node_count());
  reach[tree.root()] = 1.0;
  Vec out = Vec::Zero(tree.leaf_count());
  for (Index id = 0; id < tree.node_count(); ++id) {
    const TokenTree::Node& node = tree.node(id);
    if (node.leaf_index >= 0) out[node.leaf_index] = reach[id];
    for (std::size_t c = 0; c < node.children.size(); ++c)
      reach[node.children[c]] =
          reach[id] * policy.action_probs[static_cast<std::size_t>(id)][static_cast<Index>(c)];
  }
  return out;
}

Index rollout(const TokenTree& tree, const InducedPolicy& policy, std::mt19937_64& rng) {
  if (policy.node_mass.size() != tree.node_count() || policy.node_mass[tree.root()] <= 0.0)
    throw std::invalid_argument("rollout: root carries no mass");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Index id = tree.root();
  while (tree.node(id).leaf_index < 0) {
    const Vec& probs = policy.action_probs[static_cast<std::size_t>(id)];
    const double u = uniform(rng);
    double acc = 0.0;
    Index chosen = -1;
    for (Index c = 0; c < probs.size(); ++c) {
      if (probs[c] <= 0.0) continue;
      acc += probs[c];
      if (u < acc) {
        chosen = c;
        break;
      }
    }
    if (chosen < 0) {  // u landed in the rounding tail; take the last live child
      for (Index c = probs.size() - 1; c >= 0; --c)
        if (probs[c] > 0.0) {
          chosen = c;
          break;
        }
    }
    if (chosen < 0) throw std::logic_error("rollout: reached a zero-mass node");
    id = tree.node(id).children[static_cast<std::size_t>(chosen)];
    if (policy.node_mass[id] <= 0.0)
      throw std::logic_error("rollout: sampled into a zero-mass subtree");
  }
  return tree.node(id).leaf_index;
}

}  // namespace fairgen
