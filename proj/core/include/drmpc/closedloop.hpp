#pragma once

#include "drmpc/model.hpp"
#include "drmpc/polytope.hpp"
#include "drmpc/solver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drmpc {

/// Zero-mean disturbances w = Sigma^{1/2} omega with omega uniform on [-sqrt(3), sqrt(3)]^q, so
/// E[w w'] = Sigma. The draw for (realization s, step k) depends only on (master seed, s, k).
class DisturbanceModel {
 public:
  /// Throws std::invalid_argument if Sigma is not PSD or if the image of the sampling cube
  /// leaves W (every vertex is checked).
  DisturbanceModel(const Eigen::MatrixXd& sigma, const Polytope& W);

  Eigen::VectorXd sample(std::uint64_t master, std::uint64_t s, std::uint64_t k) const;

  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& root() const { return root_; }
  int dim() const { return static_cast<int>(sigma_.rows()); }

 private:
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd root_;
};

enum class Controller { kDrmpc, kSmpc, kRmpc };

std::string_view to_string(Controller c);
/// Accepts "drmpc", "smpc", "rmpc"; throws std::invalid_argument otherwise.
Controller parse_controller(std::string_view name);

/// The scenario with the ambiguity parameters of the variant: DRMPC keeps (eps, sigma_hat),
/// SMPC uses (0, sigma_hat), RMPC uses (0, 0).
ScenarioSpec with_controller(const ScenarioSpec& spec, Controller c);

struct ControlStep {
  Eigen::VectorXd u;
  DrmpcSolution solution;
};

/// First input v(0) of the optimal policy at x. `warm` is used when feasible at x.
ControlStep control_law(DrmpcSolver& solver, const Eigen::VectorXd& x,
                        const PolicyParams* warm = nullptr);

/// Candidate policy for the successor state Ax + Bv(0) + Gw: inputs of steps 1..N-1 re-indexed
/// with w(0) fixed to its realized value, extended by u = K x(N) with K the terminal gain
/// (zero when none is declared).
PolicyParams shift_policy(const StackedProblem& sp, const PolicyParams& theta,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& w0,
                          const std::optional<Eigen::MatrixXd>& terminal_gain);

struct ClosedLoopSettings {
  int T = 100;
  int S = 1;
  std::uint64_t seed = 1;
  /// Worker threads; 0 uses the hardware concurrency.
  int jobs = 1;
  bool warm_start = true;
  SolverSettings solver;
};

struct StepRecord {
  int k = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  double stage_cost = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Zero unless solver.record_time is set.
  std::int64_t solve_ns = 0;
};

struct Realization {
  int s = 0;
  /// Steps 0..T-1; x_final is the state after the last step.
  std::vector<StepRecord> steps;
  Eigen::VectorXd x_final;
  bool failed = false;
  int failed_step = -1;
  std::string failure;

  /// (1/k) sum_{i<k} stage cost for k = 1..steps.size(); index k-1.
  std::vector<double> running_average() const;
  /// |x(k)|^2 for k = 0..steps.size() (the last entry uses x_final).
  std::vector<double> state_norms_sq() const;
};

struct SimulationResult {
  Controller controller = Controller::kDrmpc;
  std::vector<Realization> realizations;

  int failures() const;
};

/// Runs S closed-loop realizations of x+ = Ax + B kappa(x) + Gw for T steps. Disturbances use
/// counter seeds (seed, s, k), so every controller sees the same streams. Realizations run on
/// `jobs` threads with one solver each; results are ordered by s.
SimulationResult simulate(const ScenarioSpec& spec, const Eigen::VectorXd& x0,
                          const DisturbanceModel& dist, const ClosedLoopSettings& settings,
                          Controller controller = Controller::kDrmpc);

/// Per-step statistics over the successful realizations.
struct AggregateStats {
  int realizations = 0;
  int failures = 0;
  /// Index k = 0..T.
  std::vector<double> mean_sq_norm, std_sq_norm;
  /// Index k-1 for k = 1..T.
  std::vector<double> mean_cost, std_cost, min_cost, max_cost;
};

/// Throws std::invalid_argument when no realization succeeded or horizons differ.
AggregateStats aggregate(const SimulationResult& result);

struct SweepRow {
  double epsilon = 0.0;
  int failures = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Closed-loop DRMPC for each radius in `grid` with shared disturbance streams; reports the
/// statistics of the final running average. Throws std::invalid_argument if a radius is
/// rejected by check_membership_D.
std::vector<SweepRow> epsilon_sweep(const ScenarioSpec& spec, const std::vector<double>& grid,
                                    const Eigen::VectorXd& x0, const DisturbanceModel& dist,
                                    const ClosedLoopSettings& settings);

/// k, x0..x{n-1}, u0..u{m-1}, stage_cost, gap, iterations, solve_ns
void write_trajectory_csv(std::ostream& os, const Realization& r);
/// k, mean_sq_norm, std_sq_norm, mean_cost, std_cost, min_cost, max_cost (cost columns empty at k=0)
void write_aggregate_csv(std::ostream& os, const AggregateStats& stats);
/// epsilon, failures, mean, std, min, max
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace drmpc
