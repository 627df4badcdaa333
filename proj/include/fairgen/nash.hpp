#pragma once

#include "fairgen/policies.hpp"
#include "fairgen/token_tree.hpp"
#include "fairgen/types.hpp"

#include <random>
#include <stdexcept>
#include <vector>

namespace fairgen {

struct SolverConfig {
  double epsilon = 1e-6;       // Frank-Wolfe duality-gap target
  int max_iters = 100000;
  double min_positive = 1e-300;  // floor for every agent's expected utility
  bool record_trace = false;     // keep per-iteration objective values

  void validate() const;
};

class PositivityError : public std::runtime_error {
 public:
  PositivityError(std::string message, Index agent)
      : std::runtime_error(std::move(message)), agent_(agent) {}
  Index agent() const { return agent_; }

 private:
  Index agent_;
};

// Lottery helpers. A lottery is a nonnegative vector summing to 1 over the
// tree's leaves, in leaf order.
void validate_lottery(const Vec& lottery, double sum_tol = 1e-9);

// Sum over agents of log(u_i' p); -inf when any expected utility is <= 0.
double nash_welfare(const UtilityMatrix& utilities, const Vec& lottery);

struct NashSolution {
  Vec lottery;
  double log_nash_welfare = 0.0;
  double gap = 0.0;  // Frank-Wolfe duality gap at the returned iterate
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective per iteration when recorded
};

// Maximizes sum_i log(u_i' p) over the simplex with Frank-Wolfe from the
// uniform lottery. Steps follow the 2/(k+2) schedule; a step is halved until
// it does not decrease the objective, keeping the iterate interior and the
// objective monotone.
NashSolution maximize_nash_welfare(const UtilityMatrix& utilities,
                                   const SolverConfig& cfg = {});

// Gradient of the log Nash welfare at `lottery` (for checks and callers).
Vec nash_welfare_gradient(const UtilityMatrix& utilities, const Vec& lottery);

// Conditional action distribution at every node, derived from a lottery so
// that sequential sampling reproduces it.
struct InducedPolicy {
  std::vector<Vec> action_probs;  // per node, aligned with node children
  Vec node_mass;                  // subtree mass; zero-mass nodes have all-zero rows
};

// Weights below 1e-12 are truncated to zero and the lottery renormalized
// before the masses are taken.
InducedPolicy induce_policy(const TokenTree& tree, const Vec& lottery);

// Per-leaf product of conditionals along the leaf's path.
Vec policy_leaf_distribution(const TokenTree& tree, const InducedPolicy& policy);

// Samples one leaf by sequential conditional sampling. The root must carry
// positive mass.
Index rollout(const TokenTree& tree, const InducedPolicy& policy, std::mt19937_64& rng);

}  // namespace fairgen
