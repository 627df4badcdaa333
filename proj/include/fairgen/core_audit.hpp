#pragma once

#include "fairgen/nash.hpp"
#include "fairgen/policies.hpp"
#include "fairgen/synthetic.hpp"
#include "fairgen/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fairgen {

inline constexpr int kCoalitionEnumerationCap = 12;

struct BlockingResult {
  double t_star = 0.0;
  Vec witness;  // improving lottery over the leaf set, total mass = budget
};

// Largest uniform factor t such that every coalition member can secure
// t times their base utility with `mass` of probability budget:
//   maximize t  s.t.  u_i' p >= t * base_i,  sum p = mass,  p >= 0.
BlockingResult solve_maxmin_lp(const Mat& coalition_utilities, const Vec& base, double mass);

struct CoalitionImprovement {
  double alpha_star = 0.0;
  std::uint32_t coalition_mask = 0;  // bit i set when agent i is in the witness coalition
  Vec witness;
};

// Exact maximum of the coalition improvement factor over all nonempty
// coalitions, each with budget |S|/n. Requires n <= kCoalitionEnumerationCap.
CoalitionImprovement max_coalition_improvement(const UtilityMatrix& utilities,
                                               const Vec& p_base,
                                               int coalition_cap = kCoalitionEnumerationCap);

Vec uniform_lottery(Index leaves);

// Point mass on the leaf maximizing the column sum of utilities (ties to the
// lowest index).
Vec utilitarian_lottery(const UtilityMatrix& utilities);

struct AuditRow {
  double rho = 0.0;
  std::string policy;  // "nash" | "uniform" | "utilitarian"
  double alpha_star = 0.0;
  std::uint32_t witness_coalition = 0;
  Vec witness;
  double runtime_ms = 0.0;
  bool solver_converged = true;  // Nash solve status for this grid point
};

struct AuditReport {
  std::vector<AuditRow> rows;
};

// Rebuilds the environment at every grid point (same seed, only rho varies)
// and audits the Nash-optimal, uniform, and utilitarian lotteries.
AuditReport polarization_sweep(const SyntheticEnvConfig& env_base,
                               const std::vector<double>& rho_grid,
                               const SolverConfig& solver_cfg = {});

}  // namespace fairgen
