#pragma once

#include "drmpc/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace drmpc {

/// Squared Gelbrich distance tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2).
double gelbrich_distance_sq(const Eigen::MatrixXd& S1, const Eigen::MatrixXd& S2);

struct InnerMaxResult {
  Eigen::MatrixXd sigma;
  double value = 0.0;
  /// Optimal dual multiplier; +inf when the ball is a singleton or Z = 0.
  double gamma = 0.0;
  /// Dual bound minus primal value at return.
  double gap = 0.0;
  int iterations = 0;
  /// False when sigma_hat is singular and the maximizer may not be unique.
  bool unique = true;
};

inline constexpr double kDefaultInnerTol = 1e-9;

/// max tr(Z S) over the Gelbrich ball of radius d.epsilon around d.sigma_hat.
/// Throws std::invalid_argument on non-symmetric Z or tol <= 0.
InnerMaxResult worst_case_block(const Eigen::MatrixXd& Z, const AmbiguityParams& d,
                                double tol = kDefaultInnerTol);

struct WorstCaseResult {
  double f = 0.0;
  BlockCovariance sigma;
  std::vector<InnerMaxResult> blocks;
  bool unique = true;
};

/// f(theta) = L(x, theta, 0) + sum_k max tr(Z_k(theta) S_k) and the block maximizer.
WorstCaseResult worst_case_objective(const StackedProblem& sp, const PolicyParams& theta,
                                     const AmbiguityParams& d, double tol = kDefaultInnerTol);

/// Gradient of f via the maximizing covariance. When the maximizer is not unique this is a
/// subgradient and `unique` in the returned result is false.
PolicyParams worst_case_gradient(const StackedProblem& sp, const PolicyParams& theta,
                                 const AmbiguityParams& d, double tol = kDefaultInnerTol,
                                 WorstCaseResult* at = nullptr);

enum class Membership { kOk, kConservativeOk, kReject };
const char* to_string(Membership m);

/// Sufficient check that every covariance in the ball is realizable by a zero-mean
/// distribution supported on W, using the scaled-uniform family w = S^1/2 omega,
/// omega iid uniform on [-sqrt3, sqrt3]. Only symmetric-box W can be certified.
Membership check_membership_D(const Polytope& W, const AmbiguityParams& d);

/// Upper bound on the curvature of L(., Sigma) for the given block covariance: the largest
/// eigenvalue of its Hessian in (M, v). Used as beta for the non-backtracking step rule.
double estimate_smoothness(const StackedProblem& sp, const BlockCovariance& sigma);

/// estimate_smoothness at (sqrt(lambda_max(sigma_hat)) + epsilon)^2 I, which dominates every
/// covariance in the ball, repeated over the horizon.
double estimate_smoothness_over_ball(const StackedProblem& sp, const AmbiguityParams& d, int N);

}  // namespace drmpc
