#include "fairgen/core_audit.hpp"

#include "fairgen/simplex_lp.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <sstream>

namespace fairgen {

BlockingResult solve_maxmin_lp(const Mat& coalition_utilities, const Vec& base, double mass) {
  const Index members = coalition_utilities.rows();
  const Index leaves = coalition_utilities.cols();
  if (members < 1 || leaves < 1)
    throw std::invalid_argument("solve_maxmin_lp: empty coalition or leaf set");
  if (base.size() != members)
    throw std::invalid_argument("solve_maxmin_lp: base/utility dimension mismatch");
  if ((base.array() <= 0.0).any())
    throw std::invalid_argument("solve_maxmin_lp: base utilities must be positive");
  if (!(mass > 0.0)) throw std::invalid_argument("solve_maxmin_lp: budget must be positive");

  // Variables are [p' (leaves), t].
  LinearProgram<double> lp;
  lp.objective = Vec::Zero(leaves + 1);
  lp.objective[leaves] = 1.0;
  lp.constraints = Mat::Zero(members + 1, leaves + 1);
  lp.rhs = Vec::Zero(members + 1);
  lp.constraints.row(0).head(leaves).setOnes();
  lp.rhs[0] = mass;
  lp.relations.push_back(LpRelation::equal);
  for (Index i = 0; i < members; ++i) {
    lp.constraints.row(i + 1).head(leaves) = coalition_utilities.row(i);
    lp.constraints(i + 1, leaves) = -base[i];
    lp.relations.push_back(LpRelation::greater_equal);
  }

  const LpSolution<double> solution = solve_lp(lp);
  if (solution.status != LpStatus::optimal) {
    std::ostringstream msg;
    msg << "solve_maxmin_lp: solver returned "
        << (solution.status == LpStatus::infeasible ? "infeasible" : "unbounded")
        << " (phase-1 residual " << solution.phase1_residual << ")";
    throw LpError(msg.str());
  }

  BlockingResult out;
  out.t_star = solution.x[leaves];
  out.witness = solution.x.head(leaves);
  return out;
}

CoalitionImprovement max_coalition_improvement(const UtilityMatrix& utilities,
                                               const Vec& p_base, int coalition_cap) {
  utilities.validate();
  const Index n = utilities.agents();
  if (n > coalition_cap)
    throw std::invalid_argument(
        "max_coalition_improvement: " + std::to_string(n) + " agents exceed the exact "
        "enumeration cap of " + std::to_string(coalition_cap) + "; lower the agent count");
  if (p_base.size() != utilities.leaves())
    throw std::invalid_argument("max_coalition_improvement: lottery dimension mismatch");

  const Vec base = utilities.values * p_base;
  for (Index i = 0; i < n; ++i)
    if (base[i] <= 0.0)
      throw std::invalid_argument("max_coalition_improvement: agent " + std::to_string(i) +
                                  " has nonpositive base utility under the audited lottery");

  CoalitionImprovement best;
  best.alpha_star = kNegInf;
  const std::uint32_t masks = (1u << n) - 1u;
  for (std::uint32_t mask = 1; mask <= masks; ++mask) {
    const int size = std::popcount(mask);
    Mat coalition(size, utilities.leaves());
    Vec coalition_base(size);
    int row = 0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        coalition.row(row) = utilities.values.row(i);
        coalition_base[row] = base[i];
        ++row;
      }
    }
    const double budget = static_cast<double>(size) / static_cast<double>(n);
    const BlockingResult result = solve_maxmin_lp(coalition, coalition_base, budget);
    if (result.t_star > best.alpha_star) {
      best.alpha_star = result.t_star;
      best.coalition_mask = mask;
      best.witness = result.witness;
    }
  }
  return best;
}

Vec uniform_lottery(Index leaves) {
  if (leaves < 1) throw std::invalid_argument("uniform_lottery: need at least one leaf");
  return Vec::Constant(leaves, 1.0 / static_cast<double>(leaves));
}

Vec utilitarian_lottery(const UtilityMatrix& utilities) {
  utilities.validate();
  const Vec sums = utilities.values.colwise().sum();
  Index best = 0;
  for (Index j = 1; j < sums.size(); ++j)
    if (sums[j] > sums[best]) best = j;
  Vec out = Vec::Zero(utilities.leaves());
  out[best] = 1.0;
  return out;
}

AuditReport polarization_sweep(const SyntheticEnvConfig& env_base,
                               const std::vector<double>& rho_grid,
                               const SolverConfig& solver_cfg) {
  if (rho_grid.empty()) throw std::invalid_argument("polarization_sweep: empty rho grid");
  env_base.validate();
  if (env_base.n_agents > kCoalitionEnumerationCap)
    throw std::invalid_argument("polarization_sweep: agent count exceeds the coalition "
                                "enumeration cap");

  AuditReport report;
  const TokenTree tree = build_synthetic_tree(env_base.branching, env_base.depth);
  for (double rho : rho_grid) {
    SyntheticEnvConfig cfg = env_base;
    cfg.polarization = rho;
    AgentList agents;
    UtilityMatrix utilities;
    try {
      agents = make_synthetic_agents(cfg);
      utilities = utility_matrix(agents, tree);
    } catch (const std::exception& e) {
      throw std::runtime_error("polarization_sweep: rho=" + std::to_string(rho) + ": " +
                               e.what());
    }

    bool converged = true;
    Vec nash;
    try {
      const NashSolution solution = maximize_nash_welfare(rescale_rows(utilities), solver_cfg);
      nash = solution.lottery;
      converged = solution.converged;
    } catch (const std::exception& e) {
      throw std::runtime_error("polarization_sweep: rho=" + std::to_string(rho) +
                               ": nash solve failed: " + e.what());
    }

    const std::vector<std::pair<std::string, Vec>> policies = {
        {"nash", nash},
        {"uniform", uniform_lottery(tree.leaf_count())},
        {"utilitarian", utilitarian_lottery(utilities)},
    };
    for (const auto& [label, lottery] : policies) {
      const auto start = std::chrono::steady_clock::now();
      CoalitionImprovement improvement;
      try {
        improvement = max_coalition_improvement(utilities, lottery);
      } catch (const std::exception& e) {
        throw std::runtime_error("polarization_sweep: rho=" + std::to_string(rho) + " policy=" +
                                 label + ": " + e.what());
      }
      const auto stop = std::chrono::steady_clock::now();
      AuditRow row;
      row.rho = rho;
      row.policy = label;
      row.alpha_star = improvement.alpha_star;
      row.witness_coalition = improvement.coalition_mask;
      row.witness = improvement.witness;
      row.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      row.solver_converged = converged;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace fairgen
