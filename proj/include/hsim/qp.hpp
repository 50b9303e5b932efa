#pragma once

#include <Eigen/Dense>

namespace hsim {

/// Strictly convex QP with diagonal Hessian:
///   minimize    1/2 x' diag(h) x + g' x
///   subject to  E x = f,   C x <= d
/// Solved by a dense primal active-set method; the caller supplies a feasible
/// starting point (for the velocity-control problems built here, x0 with zero
/// joint velocities and slack-satisfied rows is feasible whenever the hard
/// constraints admit standing still).
struct QpProblem {
  Eigen::VectorXd h;  // diagonal Hessian, all entries > 0
  Eigen::VectorXd g;  // linear term (may be empty for zero)
  Eigen::MatrixXd E;
  Eigen::VectorXd f;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
};

struct QpSolution {
  bool feasible = false;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_dual;    // multipliers for E rows
  Eigen::VectorXd ineq_dual;  // multipliers for C rows (>= 0, zero if inactive)
  int iterations = 0;

  /// max-norm KKT residuals, for verification
  double stationarity(const QpProblem& p) const;
  double primal_infeasibility(const QpProblem& p) const;
  double complementarity(const QpProblem& p) const;
};

QpSolution solve_qp(const QpProblem& p, const Eigen::VectorXd& x0);

}  // namespace hsim
