#pragma once

#include "drmpc/ambiguity.hpp"
#include "drmpc/model.hpp"
#include "drmpc/qp.hpp"
#include "drmpc/sets.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmpc {

enum class Method { kFrankWolfe, kNewtonType };
enum class StepRule { kAdaptive, kFullyAdaptive };
enum class InitRule {
  /// Minimizer of L(., blockdiag(sigma_hat)) over the policy set.
  kNominalQp,
  /// theta = 0 when feasible, else kFeasibleLp.
  kZero,
  /// Any point of the policy set (LP with zero objective).
  kFeasibleLp,
};

const char* to_string(Method m);
const char* to_string(StepRule r);

struct SolverSettings {
  Method method = Method::kNewtonType;
  StepRule step = StepRule::kFullyAdaptive;
  /// Smoothness estimate. Required for the adaptive rule; initial value (default 1) for the
  /// fully adaptive rule.
  std::optional<double> beta;
  double zeta = 2.0;
  double tau = 2.0;
  double gap_tol = 1e-6;
  int max_iter = 100;
  /// Primal-dual tolerance of each inner covariance maximization.
  double inner_tol = 1e-12;
  int max_backtracks = 60;
  InitRule init = InitRule::kNominalQp;
  QpSettings qp;
  LpSettings lp;
  /// Record wall-clock times in traces. Off by default so traces are reproducible.
  bool record_time = false;

  /// Throws std::invalid_argument on zeta, tau <= 1, gap_tol <= 0, or a missing beta for the
  /// adaptive rule.
  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double f = 0.0;
  double gap = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  /// Sum of the inner covariance maximization values.
  double inner_value = 0.0;
  QpStatus oracle_status = QpStatus::kOptimal;
  int backtracks = 0;
  /// Set when the step rule saw a non-descent direction or could not resolve the decrease test.
  bool flagged = false;
  /// NT only: the QP direction was not a descent direction and the LP vertex was used instead.
  bool fw_fallback = false;
  std::int64_t wall_ns = 0;
};

struct SolveTrace {
  std::vector<IterationRecord> records;

  /// Columns: iter,f,gap,eta,beta,wall_ns.
  void write_csv(std::ostream& os) const;
};

enum class SolveStatus { kConverged, kMaxIter };

struct DrmpcSolution {
  PolicyParams theta;
  double f = 0.0;
  BlockCovariance sigma;
  double gap = 0.0;
  SolveStatus status = SolveStatus::kMaxIter;
  int iterations = 0;
  SolveTrace trace;

  bool converged() const { return status == SolveStatus::kConverged; }
};

/// The state has an empty policy set.
class OutsideFeasibleSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A subproblem failed or the line search did not terminate.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// eta = min(1, g / (beta |d|^2)); a non-positive g returns 0 and sets *flagged.
double step_adaptive(double g, double d_sq, double beta, bool* flagged = nullptr);

struct FullyAdaptiveStep {
  double eta = 0.0;
  double beta = 0.0;
  double f_new = 0.0;
  int backtracks = 0;
  /// The predicted decrease was below `noise`, so beta_prev was kept without a test.
  bool unresolved = false;
};

/// Backtracking on beta: starts at beta_prev / zeta and multiplies by tau until
/// f(eta) <= f0 - eta g + eta^2 beta |d|^2 / 2 + noise. `f_along(eta)` evaluates f(theta + eta d).
/// When the decrease predicted by the first trial is below `noise` the test cannot be decided in
/// floating point; beta_prev is then kept without evaluating f. If `slope_along(eta)`, the
/// derivative d' grad f(theta + eta d), is given, the step in that case minimizes the quadratic
/// through the slopes at 0 and at beta_prev's step; otherwise beta_prev's step is used.
/// Throws SolverError after `max_backtracks` increases.
FullyAdaptiveStep step_fully_adaptive(const std::function<double(double)>& f_along, double f0,
                                      double g, double d_sq, double beta_prev, double zeta,
                                      double tau, int max_backtracks = 60, double noise = 0.0,
                                      const std::function<double(double)>& slope_along = {});

/// Frank-Wolfe and Newton-type solvers for the worst-case expected cost over the policy set.
/// The instance caches the stacked matrices, the lifted set, and the subproblem factorizations,
/// so repeated solves at different states reuse them. Not thread-safe.
class DrmpcSolver {
 public:
  DrmpcSolver(ScenarioSpec spec, SolverSettings settings);

  /// Solves at state x. A `warm` point that is feasible at x replaces the init rule's point
  /// when its worst-case cost is lower.
  DrmpcSolution solve(const Eigen::VectorXd& x, const PolicyParams* warm = nullptr);

  const ScenarioSpec& spec() const { return spec_; }
  const SolverSettings& settings() const { return settings_; }
  SolverSettings& mutable_settings() { return settings_; }
  const StackedProblem& stacked() const { return sp_; }
  const LiftedPolicySet& policy_set() const { return set_; }

  /// argmin over the policy set of grad' theta.
  PolicyParams fw_oracle(const Eigen::VectorXd& x, const PolicyParams& grad,
                         QpStatus* status = nullptr);
  /// argmin over the policy set of L(x, ., sigma).
  PolicyParams nt_oracle(const Eigen::VectorXd& x, const BlockCovariance& sigma,
                         const PolicyParams* warm = nullptr, QpStatus* status = nullptr);
  /// (theta - F1(theta))' grad f(theta).
  double certificate_gap(const Eigen::VectorXd& x, const PolicyParams& theta);

  /// The QP whose minimizer is nt_oracle's result (objective differs by a constant).
  QpProblem oracle_qp(const Eigen::VectorXd& x, const BlockCovariance& sigma) const;

  /// Drops the subproblem warm starts (QP iterates, LP basis) so the next solve depends only on
  /// its arguments.
  void reset_warm_start();

 private:
  PolicyParams initial_point(const Eigen::VectorXd& x);
  QpSolution run_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& c);

  ScenarioSpec spec_;
  SolverSettings settings_;
  StackedProblem sp_;
  LiftedPolicySet set_;
  LpSolver lp_solver_;
  QpSolver qp_solver_;
  QpWarmStart qp_warm_;
  QpWarmStart init_warm_;
  // M entries grouped by disturbance block, for assembling the oracle Hessian.
  std::vector<std::vector<Eigen::Index>> m_by_block_;
};

/// One-shot convenience wrapper.
DrmpcSolution solve_drmpc(const ScenarioSpec& spec, const Eigen::VectorXd& x,
                          const SolverSettings& settings);

}  // namespace drmpc
