#include "hsim/qp.hpp"

#include <limits>
#include <vector>

namespace hsim {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kDualTol = 1e-10;

// Equality-constrained step: solve min 1/2 x'Hx + g'x s.t. A x = b via the
// Schur complement in the multipliers (H is diagonal PD).
void eqp_solve(const Eigen::VectorXd& h, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
               const Eigen::VectorXd& b, Eigen::VectorXd& x, Eigen::VectorXd& lambda) {
  Eigen::VectorXd hinv = h.cwiseInverse();
  if (A.rows() == 0) {
    x = -hinv.cwiseProduct(g);
    lambda.resize(0);
    return;
  }
  Eigen::MatrixXd AHi = A * hinv.asDiagonal();
  Eigen::MatrixXd S = AHi * A.transpose();
  Eigen::VectorXd rhs = -(b + AHi * g);
  // complete orthogonal decomposition tolerates temporarily dependent rows
  lambda = S.completeOrthogonalDecomposition().solve(rhs);
  x = -hinv.cwiseProduct(g + A.transpose() * lambda);
}

}  // namespace

double QpSolution::stationarity(const QpProblem& p) const {
  Eigen::VectorXd r = p.h.cwiseProduct(x);
  if (p.g.size()) r += p.g;
  if (p.E.rows()) r += p.E.transpose() * eq_dual;
  if (p.C.rows()) r += p.C.transpose() * ineq_dual;
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

double QpSolution::primal_infeasibility(const QpProblem& p) const {
  double v = 0.0;
  if (p.E.rows()) v = (p.E * x - p.f).cwiseAbs().maxCoeff();
  if (p.C.rows()) v = std::max(v, (p.C * x - p.d).maxCoeff());
  return std::max(v, 0.0);
}

double QpSolution::complementarity(const QpProblem& p) const {
  double v = 0.0;
  if (p.C.rows()) {
    Eigen::VectorXd s = p.d - p.C * x;
    for (int i = 0; i < s.size(); ++i) v = std::max(v, std::abs(ineq_dual[i] * s[i]));
  }
  return v;
}

QpSolution solve_qp(const QpProblem& p, const Eigen::VectorXd& x0) {
  const int n = static_cast<int>(p.h.size());
  const int me = static_cast<int>(p.E.rows());
  const int mi = static_cast<int>(p.C.rows());
  QpSolution sol;
  sol.x = x0;
  sol.eq_dual = Eigen::VectorXd::Zero(me);
  sol.ineq_dual = Eigen::VectorXd::Zero(mi);
  Eigen::VectorXd g = p.g.size() ? p.g : Eigen::VectorXd::Zero(n);

  // feasibility of the start point
  if (me && (p.E * sol.x - p.f).cwiseAbs().maxCoeff() > 1e-7) return sol;
  if (mi && (p.C * sol.x - p.d).maxCoeff() > 1e-7) return sol;

  std::vector<int> working;  // active inequality indices
  const int max_iter = 60 + 12 * (me + mi);
  for (int iter = 0; iter < max_iter; ++iter) {
    sol.iterations = iter + 1;
    const int mw = static_cast<int>(working.size());
    Eigen::MatrixXd A(me + mw, n);
    Eigen::VectorXd b(me + mw);
    if (me) {
      A.topRows(me) = p.E;
      b.head(me) = p.f;
    }
    for (int i = 0; i < mw; ++i) {
      A.row(me + i) = p.C.row(working[i]);
      b[me + i] = p.d[working[i]];
    }
    Eigen::VectorXd xeq, lambda;
    eqp_solve(p.h, g, A, b, xeq, lambda);
    Eigen::VectorXd step = xeq - sol.x;

    if (step.cwiseAbs().maxCoeff() < 1e-12) {
      // candidate optimum on the working set; check signs of the inequality
      // multipliers
      int worst = -1;
      double worst_val = -kDualTol;
      for (int i = 0; i < mw; ++i) {
        if (lambda[me + i] < worst_val) {
          worst_val = lambda[me + i];
          worst = i;
        }
      }
      if (worst < 0) {
        sol.feasible = true;
        sol.x = xeq;
        sol.eq_dual = lambda.head(me);
        sol.ineq_dual.setZero();
        for (int i = 0; i < mw; ++i) sol.ineq_dual[working[i]] = std::max(0.0, lambda[me + i]);
        return sol;
      }
      working.erase(working.begin() + worst);
      continue;
    }

    // ratio test against inactive inequalities
    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < mi; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      double ci_p = p.C.row(i).dot(step);
      if (ci_p > 1e-13) {
        double slack = p.d[i] - p.C.row(i).dot(sol.x);
        double a = std::max(0.0, slack) / ci_p;
        if (a < alpha - 1e-14) {
          alpha = a;
          blocker = i;
        }
      }
    }
    sol.x += alpha * step;
    if (blocker >= 0)
      working.push_back(blocker);
    else if (alpha >= 1.0) {
      // full step without blockers: next pass verifies multipliers
      sol.x = xeq;
    }
  }
  // iteration cap: report the best point found (still primal feasible)
  sol.feasible = (mi == 0 || (p.C * sol.x - p.d).maxCoeff() <= kFeasTol) &&
                 (me == 0 || (p.E * sol.x - p.f).cwiseAbs().maxCoeff() <= 1e-7);
  return sol;
}

}  // namespace hsim
