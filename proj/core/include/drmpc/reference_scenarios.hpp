#pragma once

#include "drmpc/model.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace drmpc {

/// Two-state, two-input example: A = [0.9 0; 0.2 0.8], B = G = I, Q = diag(0.1, 10),
/// R = diag(10, 0.1), U = {|u| <= 1, u2 >= 0}, W = {|w| <= 1}, sigma_hat = 0.01 I, Lyapunov
/// terminal cost and no terminal constraint.
ScenarioSpec small_scale_scenario(double epsilon = 0.1, int N = 10);

/// The correlated disturbance covariance [0.01 0.01; 0.01 0.035] used with small_scale_scenario.
Eigen::MatrixXd small_scale_true_covariance();

/// The small-scale plant with Riccati terminal ingredients: U = {|u| <= 1}, W = {|w| <= 0.1},
/// sigma_hat = 5e-4 I, and Xf the largest invariant subset of {|K x| <= 1} under u = K x. The
/// origin is interior and the inputs are unsaturated there.
ScenarioSpec dare_interior_scenario(double epsilon = 0.1, int N = 10);

/// diag(1e-3, 2e-3), the disturbance covariance used with dare_interior_scenario.
Eigen::MatrixXd dare_interior_true_covariance();

/// Synthetic 20-state plant with 3 inputs and 2 disturbances: random Schur-stable dynamics,
/// Q = C' diag(20, 10, 1) C, R = 0.1 I, U = {|u| <= 1, u3 >= 0}, W = {|w| <= 1},
/// sigma_hat = 0.01 I, epsilon = 0.1, Lyapunov terminal cost.
ScenarioSpec large_scale_scenario(std::uint64_t seed = 7, int N = 10);

/// diag(0.04, 0.01), the disturbance covariance used with large_scale_scenario.
Eigen::MatrixXd large_scale_true_covariance();

}  // namespace drmpc
