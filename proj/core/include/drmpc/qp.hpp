#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <iosfwd>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace drmpc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex quadratic program
///
///   minimize    1/2 z'Pz + q'z
///   subject to  l <= A z <= u
///
/// Equalities are rows with l == u. Infinite bounds are +/-kInf. P is stored
/// as a full symmetric sparse matrix (both triangles); zero P gives an LP.
struct QpProblem {
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_variables() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }

  /// Throws std::invalid_argument on inconsistent dimensions, l > u, or non-symmetric P.
  void validate() const;
};

enum class QpStatus { kOptimal, kPrimalInfeasible, kDualInfeasible, kMaxIter };

std::string_view to_string(QpStatus status);

struct QpSettings {
  /// ADMM penalty, initial value; adapted during the solve.
  double rho = 0.1;
  double sigma = 1e-6;
  /// Over-relaxation.
  double alpha = 1.6;
  /// First ADMM target before the first polish attempt; tightened x10 after every failed polish.
  double eps_admm = 1e-4;
  /// KKT tolerance (absolute and relative) required for kOptimal.
  double eps_optimal = 1e-9;
  double eps_prim_inf = 1e-7;
  double eps_dual_inf = 1e-7;
  int max_iter = 200000;
  int check_interval = 10;
  int scaling_iters = 10;
  bool adaptive_rho = true;
  /// Iterations between penalty updates; a multiple of check_interval.
  int adaptive_rho_interval = 50;
  /// Penalty updates allowed per solve; later iterations keep rho fixed so ADMM can settle.
  int max_rho_updates = 20;
  /// Regularization of the reduced KKT system in the polish step.
  double polish_delta = 1e-7;
  int polish_refine_iters = 30;
};

struct QpResiduals {
  double primal = kInf;
  double dual = kInf;
  /// |z'Pz + q'z + b'y| style duality gap at the returned point.
  double gap = kInf;
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  QpStatus status = QpStatus::kMaxIter;
  QpResiduals residuals;
  int iterations = 0;
  bool polished = false;
  double objective = kInf;

  bool optimal() const { return status == QpStatus::kOptimal; }
};

struct QpWarmStart {
  Eigen::VectorXd z;
  /// Optional duals; enables an immediate polish attempt from the previous active set.
  Eigen::VectorXd y;
};

/// Computes the unscaled primal and dual residuals and duality gap of (z, y).
QpResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& z, const Eigen::VectorXd& y);

/// Operator-splitting (ADMM) solver with Ruiz equilibration and an active-set polish.
///
/// A solver instance caches the symbolic KKT factorization and reuses it as long as the
/// sparsity pattern of (P, A) is unchanged, so repeated solves of problems that differ only
/// in values are cheap. Instances are single-threaded; use one per worker.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {});

  QpSolution solve(const QpProblem& problem);
  QpSolution solve(const QpProblem& problem, const QpWarmStart& warm);

  const QpSettings& settings() const { return settings_; }
  QpSettings& mutable_settings() { return settings_; }

 private:
  using Ldlt = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper,
                                     Eigen::AMDOrdering<int>>;

  struct Scaled {
    Eigen::SparseMatrix<double> P;  // upper triangle
    Eigen::SparseMatrix<double> Pfull;
    Eigen::VectorXd q;
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd l, u;
    Eigen::VectorXd D, E;
    double c = 1.0;
  };

  QpSolution run(const QpProblem& problem, const QpWarmStart* warm);
  void scale(const QpProblem& problem);
  void factor_kkt(double rho);
  bool polish(const QpProblem& problem, const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
              QpSolution* out);

  QpSettings settings_;
  Scaled s_;
  Eigen::VectorXd rho_vec_;
  Eigen::SparseMatrix<double> kkt_;
  Ldlt kkt_solver_;
  bool kkt_analyzed_ = false;
  std::vector<int> pattern_outer_;
  std::vector<int> pattern_inner_;
};

/// One-shot convenience wrapper around QpSolver.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// Writes the problem in the plain-text format documented in docs/formats.md.
void write_qp_text(std::ostream& os, const QpProblem& problem);
QpProblem read_qp_text(std::istream& is);

}  // namespace drmpc
