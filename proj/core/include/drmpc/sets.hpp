#pragma once

#include "drmpc/model.hpp"
#include "drmpc/polytope.hpp"
#include "drmpc/lp.hpp"
#include "drmpc/qp.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <utility>
#include <vector>

namespace drmpc {

/// One trajectory constraint f'x0 + g'v + sum_c (g'M[:, c] + d_c) w_c <= h that must hold for
/// every stacked disturbance w in W^N.
struct RobustRow {
  enum class Source { kZ, kU, kXf };
  Source source = Source::kZ;
  int step = 0;
  int source_row = 0;
  Eigen::VectorXd f;  // n
  Eigen::VectorXd g;  // N m
  Eigen::VectorXd d;  // N q
  double h = 0.0;
};

/// Worst case of a robust row at a given (x0, theta).
struct RowWorstCase {
  /// max_w of the left-hand side.
  double value = 0.0;
  /// A maximizing stacked disturbance.
  Eigen::VectorXd w;
};

/// Constraint set l <= A z <= u in lifted variables for a fixed state.
struct LiftedPolytope {
  const Eigen::SparseMatrix<double>* A = nullptr;
  Eigen::VectorXd l;
  Eigen::VectorXd u;
};

/// Polyhedral realization of the feasible policy set: lifted variables z = [v | causal M
/// entries | auxiliaries], constraint matrix independent of x and bounds affine in x.
class LiftedPolicySet {
 public:
  int n = 0, m = 0, q = 0, N = 0;

  Eigen::Index num_v() const { return N * m; }
  Eigen::Index num_m() const { return static_cast<Eigen::Index>(m_entries_.size()); }
  Eigen::Index num_aux() const { return num_aux_; }
  Eigen::Index num_variables() const { return num_v() + num_m() + num_aux_; }
  Eigen::Index num_constraints() const { return A_.rows(); }

  /// (row, col) of M for lifted M entry i.
  const std::vector<std::pair<int, int>>& m_entries() const { return m_entries_; }
  const std::vector<RobustRow>& robust_rows() const { return rows_; }
  const Polytope& W() const { return W_; }
  bool box_disturbance() const { return box_.size() > 0; }

  const Eigen::SparseMatrix<double>& A() const { return A_; }
  LiftedPolytope at(const Eigen::VectorXd& x) const;

  /// Rows with no decision variables reduce to checks on x alone; false means the policy set
  /// is empty at x.
  bool constant_rows_satisfied(const Eigen::VectorXd& x, double tol = 1e-9) const;

  /// z -> theta (auxiliaries dropped).
  PolicyParams unpack(const Eigen::VectorXd& z) const;
  /// theta -> (v, M) part of z.
  Eigen::VectorXd pack(const PolicyParams& theta) const;
  /// theta -> full lifted z with auxiliaries at their smallest feasible values.
  Eigen::VectorXd lift(const PolicyParams& theta) const;
  /// Maps a (v, M) gradient to lifted coordinates (zeros on auxiliaries).
  Eigen::VectorXd pack_gradient(const PolicyParams& grad) const;

  /// Worst-case value of robust row i, computed from support functions of W.
  RowWorstCase row_worst_case(std::size_t i, const Eigen::VectorXd& x,
                              const PolicyParams& theta) const;
  /// Largest robust constraint violation of theta at x (<= 0 means feasible).
  double max_violation(const Eigen::VectorXd& x, const PolicyParams& theta) const;

 private:
  friend LiftedPolicySet build_policy_set(const ScenarioSpec& spec, const StackedProblem& sp);

  Polytope W_;
  Eigen::VectorXd box_;
  std::vector<std::pair<int, int>> m_entries_;
  Eigen::MatrixXi m_index_;  // (row, col) -> lifted M index or -1
  Eigen::Index num_aux_ = 0;
  std::vector<RobustRow> rows_;
  Eigen::SparseMatrix<double> A_;
  Eigen::VectorXd l_;
  Eigen::VectorXd u0_;
  Eigen::MatrixXd Ux_;
  Eigen::MatrixXd const_F_;
  Eigen::VectorXd const_h_;

  // Auxiliary groups used by lift(): for a box W each auxiliary bounds |e'M + kappa|; for a
  // general W each group is a block of dual multipliers for one disturbance block.
  struct AuxGroup {
    std::vector<std::pair<int, double>> expr;  // (lifted M index, coefficient)
    Eigen::VectorXd constant;                  // q (general W) or 1 (box)
    Eigen::Index offset = 0;
  };
  std::vector<AuxGroup> aux_groups_;
};

/// Builds the lifted set for the scenario. The x-independent matrices of `sp` are used; its
/// state is ignored.
LiftedPolicySet build_policy_set(const ScenarioSpec& spec, const StackedProblem& sp);

/// min c'z over the lifted set at x.
QpSolution solve_lp(const Eigen::VectorXd& c, const LiftedPolicySet& set, const Eigen::VectorXd& x,
                    const LpSettings& settings = {});

}  // namespace drmpc
