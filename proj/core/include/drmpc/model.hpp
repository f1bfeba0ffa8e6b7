#pragma once

#include "drmpc/polytope.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace drmpc {

/// Gelbrich ball parameters: radius epsilon around the nominal covariance sigma_hat.
struct AmbiguityParams {
  double epsilon = 0.0;
  Eigen::MatrixXd sigma_hat;

  /// Throws std::invalid_argument on negative radius or non-PSD nominal covariance.
  void validate() const;
};

/// Block-diagonal covariance of the stacked disturbance (one q x q block per step).
struct BlockCovariance {
  std::vector<Eigen::MatrixXd> blocks;

  static BlockCovariance repeat(const Eigen::MatrixXd& block, int N);
  static BlockCovariance zero(int q, int N);
  Eigen::MatrixXd dense() const;
};

/// Linear system x+ = Ax + Bu + Gw with polytopic constraints, quadratic cost and ambiguity set.
struct ScenarioSpec {
  std::string name;
  Eigen::MatrixXd A, B, G;
  Eigen::MatrixXd Q, R, P;
  int N = 1;
  /// Joint state-input constraint over (x, u).
  Polytope Z;
  Polytope U;
  Polytope Xf;
  Polytope W;
  AmbiguityParams d;
  /// Terminal feedback gain, when terminal ingredients are declared.
  std::optional<Eigen::MatrixXd> terminal_gain;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int q() const { return static_cast<int>(G.cols()); }

  /// Dimension consistency; throws std::invalid_argument naming the offending matrix.
  void validate_dimensions() const;
  /// Dimensions, PSD costs, N >= 1, bounded W and U with 0 in int(W), 0 in Z and Xf.
  void validate() const;

  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return x.dot(Q * x) + u.dot(R * u);
  }
};

/// Disturbance-feedback policy u = M w + v. M is (N m) x (N q), strictly block lower triangular.
struct PolicyParams {
  Eigen::MatrixXd M;
  Eigen::VectorXd v;

  static PolicyParams zero(int N, int m, int q);

  PolicyParams& operator+=(const PolicyParams& o);
  PolicyParams& operator*=(double s);
  friend PolicyParams operator+(PolicyParams a, const PolicyParams& b) { return a += b; }
  friend PolicyParams operator-(PolicyParams a, const PolicyParams& b) {
    a.M -= b.M;
    a.v -= b.v;
    return a;
  }
  friend PolicyParams operator*(double s, PolicyParams a) { return a *= s; }

  double dot(const PolicyParams& o) const { return (M.cwiseProduct(o.M)).sum() + v.dot(o.v); }
  double squared_norm() const { return dot(*this); }
};

/// Zeroes every block M(i, j) with j >= i.
void apply_causal_mask(Eigen::MatrixXd& M, int N, int m, int q);
bool is_causal(const Eigen::MatrixXd& M, int N, int m, int q);

/// Prediction matrices for the stacked trajectory x = bfA x0 + bfB u + bfG w and the cost
/// J = |Hx x0 + Hu v + (Hu M + Hw) w|^2, plus their Gram products. The x0-independent part is
/// shared; `x` is the state the problem was assembled for.
struct StackedProblem {
  int n = 0, m = 0, q = 0, N = 0;
  Eigen::MatrixXd bfA, bfB, bfG;
  Eigen::MatrixXd Hx, Hu, Hw;
  Eigen::MatrixXd Huu, Hux, Huw, Hww, Hxx;
  Eigen::VectorXd x;

  StackedProblem with_state(const Eigen::VectorXd& x0) const;

  /// J(x, theta, w) via the factored form.
  double trajectory_cost(const PolicyParams& theta, const Eigen::VectorXd& w) const;
  /// Diagonal q x q block k of (Hu M + Hw)'(Hu M + Hw).
  Eigen::MatrixXd z_block(const Eigen::MatrixXd& M, int k) const;
};

StackedProblem assemble_stacked(const ScenarioSpec& spec, const Eigen::VectorXd& x);

/// L(x, theta, Sigma) = |Hx x + Hu v|^2 + tr((Hu M + Hw)'(Hu M + Hw) Sigma).
double expected_cost(const StackedProblem& sp, const PolicyParams& theta,
                     const BlockCovariance& sigma);

/// Gradient of expected_cost in (M, v); the M part is masked to the causal pattern.
PolicyParams cost_gradient(const StackedProblem& sp, const PolicyParams& theta,
                           const BlockCovariance& sigma);

}  // namespace drmpc
