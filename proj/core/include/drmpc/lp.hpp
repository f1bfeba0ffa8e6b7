#pragma once

#include "drmpc/qp.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace drmpc {

struct LpSettings {
  /// Bound violation accepted for basic variables.
  double feas_tol = 1e-9;
  /// Reduced-cost threshold for optimality.
  double opt_tol = 1e-9;
  /// Smallest pivot magnitude accepted by the ratio test.
  double pivot_tol = 1e-9;
  int max_iter = 100000;
  /// Pivots between refactorizations of the basis.
  int refactor_interval = 400;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_limit = 50;
};

/// Bounded primal simplex for  min c'z  s.t.  l <= A z <= u  with free z.
///
/// Logical variables s = Az carry the bounds. Phase one minimizes the sum of bound violations
/// of basic variables. The final basis is kept and reused by the next solve with the same
/// constraint matrix, so a sequence of LPs that differ in c or in the bounds is cheap: the basis
/// inverse is kept across solves and only refactorized on a pivot schedule.
/// The returned duals follow the QpSolution convention c + A'y = 0.
class LpSolver {
 public:
  explicit LpSolver(LpSettings settings = {});

  QpSolution solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& c,
                   const Eigen::VectorXd& l, const Eigen::VectorXd& u);
  /// Same, for a QpProblem whose P has no nonzeros.
  QpSolution solve(const QpProblem& problem);

  /// Forget the stored basis.
  void reset();
  int last_pivots() const { return last_pivots_; }

 private:
  enum class Status : unsigned char { kBasic, kLower, kUpper, kFree, kFixed };

  void cold_start();
  bool refactor();
  void recompute_basic_values();
  Eigen::VectorXd column(int j) const;
  void place_nonbasic(int j);

  LpSettings settings_;
  bool same_matrix(const Eigen::SparseMatrix<double>& A) const;

  const Eigen::SparseMatrix<double>* A_ = nullptr;
  /// Copy of the matrix the stored basis inverse belongs to.
  Eigen::SparseMatrix<double> A_copy_;
  Eigen::Index nz_ = 0;
  Eigen::Index m_ = 0;
  Eigen::VectorXd lb_, ub_, x_;
  std::vector<Status> status_;
  std::vector<int> head_;
  Eigen::MatrixXd binv_;
  bool have_basis_ = false;
  int since_refactor_ = 0;
  int last_pivots_ = 0;
};

}  // namespace drmpc
