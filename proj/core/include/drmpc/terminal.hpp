#pragma once

#include "drmpc/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace drmpc {

enum class TerminalKind { kLyapunov, kDare, kUser };
const char* to_string(TerminalKind k);

struct TerminalIngredients {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  TerminalKind kind = TerminalKind::kUser;
};

/// P with A'PA - P = -Q. Throws std::invalid_argument when A is not Schur stable
/// (spectral radius >= 1 - 1e-9), reporting the radius.
Eigen::MatrixXd solve_dlyap(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

/// Stabilizing solution of P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q and the gain
/// K = -(R + B'PB)^-1 B'PA, by structure-preserving doubling. Throws std::runtime_error when
/// the iteration diverges or the closed loop is not Schur stable.
TerminalIngredients solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Relative Frobenius residual of the Riccati equation at P.
double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

struct TerminalCheck {
  bool passed = false;
  /// Largest violation (positive means failure); +inf for an unbounded support.
  double margin = 0.0;
  std::string detail;
};

struct TerminalReport {
  /// P - Q - K'RK - (A+BK)'P(A+BK) >= 0
  TerminalCheck decrease;
  /// (A+BK)Xf + G W inside Xf
  TerminalCheck invariance;
  /// (x, Kx) in Z and Kx in U for x in Xf
  TerminalCheck admissibility;
  /// 0 in int(Xf)
  TerminalCheck interior;

  bool passed() const {
    return decrease.passed && invariance.passed && admissibility.passed && interior.passed;
  }
};

/// Largest robust positively invariant subset of `start` for x+ = Acl x + G w, w in W: intersects
/// `start` with pre-images until no row is added, dropping redundant rows after each pass.
/// Throws std::runtime_error if the set has not converged after `max_iter` passes.
Polytope invariant_subset(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& G, const Polytope& W,
                          const Polytope& start, int max_iter = 50);

TerminalReport verify_terminal(const ScenarioSpec& spec, const TerminalIngredients& ti);

struct TerminalCostComparison {
  double dare_value = 0.0;
  double lyap_value = 0.0;
  /// False when A is not Schur stable; lyap_value is then meaningless.
  bool lyap_available = false;
  /// dare_value <= lyap_value + 1e-9 (true when the Lyapunov branch is skipped).
  bool holds = true;
};

/// tr(G'PG Sigma) for the Riccati and Lyapunov terminal costs.
TerminalCostComparison compare_terminal_costs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q,
                                              const Eigen::MatrixXd& R,
                                              const Eigen::MatrixXd& Sigma);

}  // namespace drmpc
