#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairgen {

enum class LpRelation { less_equal, greater_equal, equal };
enum class LpStatus { optimal, infeasible, unbounded };

class LpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// maximize objective . x  subject to  constraints x (relation) rhs,  x >= 0
template <typename Scalar = double>
struct LinearProgram {
  using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  VecX objective;
  MatX constraints;
  VecX rhs;
  std::vector<LpRelation> relations;
};

template <typename Scalar = double>
struct LpSolution {
  using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  LpStatus status = LpStatus::optimal;
  VecX x;
  Scalar objective_value = Scalar(0);
  Scalar phase1_residual = Scalar(0);
  int pivots = 0;
};

// Dense two-phase tableau simplex with Bland's rule; exact for the small
// certification instances this library solves.
template <typename Scalar = double>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp, Scalar pivot_tol = Scalar(1e-9)) {
  using MatX = typename LinearProgram<Scalar>::MatX;
  using VecX = typename LinearProgram<Scalar>::VecX;

  const Eigen::Index rows = lp.constraints.rows();
  const Eigen::Index cols = lp.constraints.cols();
  if (lp.rhs.size() != rows || static_cast<Eigen::Index>(lp.relations.size()) != rows ||
      lp.objective.size() != cols)
    throw std::invalid_argument("solve_lp: inconsistent problem dimensions");

  // Normalize to nonnegative right-hand sides.
  MatX a = lp.constraints;
  VecX b = lp.rhs;
  std::vector<LpRelation> rel = lp.relations;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (b[i] < Scalar(0)) {
      a.row(i) *= Scalar(-1);
      b[i] *= Scalar(-1);
      if (rel[i] == LpRelation::less_equal)
        rel[i] = LpRelation::greater_equal;
      else if (rel[i] == LpRelation::greater_equal)
        rel[i] = LpRelation::less_equal;
    }
  }

  Eigen::Index slack_count = 0, artificial_count = 0;
  for (LpRelation r : rel) {
    if (r != LpRelation::equal) ++slack_count;
    if (r != LpRelation::less_equal) ++artificial_count;
  }
  const Eigen::Index total = cols + slack_count + artificial_count;
  const Eigen::Index artificial_begin = cols + slack_count;

  MatX tableau = MatX::Zero(rows, total + 1);
  tableau.block(0, 0, rows, cols) = a;
  tableau.col(total) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  Eigen::Index slack_at = cols, artificial_at = artificial_begin;
  for (Eigen::Index i = 0; i < rows; ++i) {
    switch (rel[static_cast<std::size_t>(i)]) {
      case LpRelation::less_equal:
        tableau(i, slack_at) = Scalar(1);
        basis[static_cast<std::size_t>(i)] = slack_at++;
        break;
      case LpRelation::greater_equal:
        tableau(i, slack_at) = Scalar(-1);
        ++slack_at;
        tableau(i, artificial_at) = Scalar(1);
        basis[static_cast<std::size_t>(i)] = artificial_at++;
        break;
      case LpRelation::equal:
        tableau(i, artificial_at) = Scalar(1);
        basis[static_cast<std::size_t>(i)] = artificial_at++;
        break;
    }
  }

  VecX cost = VecX::Zero(total);  // minimized
  int pivots = 0;

  auto run_simplex = [&](Eigen::Index active_cols) -> bool {
    // Reduced costs for the current basis.
    VecX reduced = cost.head(active_cols);
    Scalar shift = Scalar(0);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Scalar cb = cost[basis[static_cast<std::size_t>(i)]];
      if (cb != Scalar(0)) {
        reduced -= cb * tableau.row(i).head(active_cols).transpose();
        shift += cb * tableau(i, total);
      }
    }
    (void)shift;
    while (true) {
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < active_cols; ++j) {
        if (reduced[j] < -pivot_tol) {
          entering = j;  // Bland: lowest index
          break;
        }
      }
      if (entering < 0) return true;

      Eigen::Index leaving = -1;
      Scalar best_ratio = Scalar(0);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const Scalar aij = tableau(i, entering);
        if (aij > pivot_tol) {
          const Scalar ratio = tableau(i, total) / aij;
          if (leaving < 0 || ratio < best_ratio ||
              (ratio == best_ratio &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leaving)])) {
            leaving = i;
            best_ratio = ratio;
          }
        }
      }
      if (leaving < 0) return false;  // unbounded

      const Scalar pivot = tableau(leaving, entering);
      tableau.row(leaving) /= pivot;
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (i == leaving) continue;
        const Scalar factor = tableau(i, entering);
        if (factor != Scalar(0)) tableau.row(i) -= factor * tableau.row(leaving);
      }
      const Scalar rfactor = reduced[entering];
      if (rfactor != Scalar(0))
        reduced -= rfactor * tableau.row(leaving).head(active_cols).transpose();
      basis[static_cast<std::size_t>(leaving)] = entering;
      ++pivots;
      if (pivots > 100000) throw LpError("solve_lp: pivot limit exceeded");
    }
  };

  LpSolution<Scalar> out;

  if (artificial_count > 0) {
    cost.segment(artificial_begin, artificial_count).setConstant(Scalar(1));
    if (!run_simplex(total)) throw LpError("solve_lp: phase 1 unbounded");
    Scalar residual = Scalar(0);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (basis[static_cast<std::size_t>(i)] >= artificial_begin) residual += tableau(i, total);
    out.phase1_residual = residual;
    if (residual > Scalar(1e-7)) {
      out.status = LpStatus::infeasible;
      out.pivots = pivots;
      return out;
    }
    // Drive remaining artificials out of the basis where possible.
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (basis[static_cast<std::size_t>(i)] < artificial_begin) continue;
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < artificial_begin; ++j) {
        if (std::abs(tableau(i, j)) > pivot_tol) {
          entering = j;
          break;
        }
      }
      if (entering < 0) continue;  // redundant row; harmless to keep
      const Scalar pivot = tableau(i, entering);
      tableau.row(i) /= pivot;
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (r == i) continue;
        const Scalar factor = tableau(r, entering);
        if (factor != Scalar(0)) tableau.row(r) -= factor * tableau.row(i);
      }
      basis[static_cast<std::size_t>(i)] = entering;
      ++pivots;
    }
    cost.setZero();
  }

  cost.head(cols) = -lp.objective;  // maximize via minimizing the negation
  if (!run_simplex(artificial_begin)) {
    out.status = LpStatus::unbounded;
    out.pivots = pivots;
    return out;
  }

  out.x = VecX::Zero(cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    if (basis[static_cast<std::size_t>(i)] < cols)
      out.x[basis[static_cast<std::size_t>(i)]] = tableau(i, total);
  out.objective_value = lp.objective.dot(out.x);
  out.pivots = pivots;
  out.status = LpStatus::optimal;
  return out;
}

}  // namespace fairgen
