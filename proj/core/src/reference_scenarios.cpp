#include "drmpc/reference_scenarios.hpp"

#include "drmpc/linalg.hpp"
#include "drmpc/random.hpp"
#include "drmpc/terminal.hpp"

#include <cmath>

namespace drmpc {

namespace {

/// {|u| <= 1, u_last >= 0} as 2m rows.
Polytope asymmetric_input_box(int m) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -1.0);
  lo(m - 1) = 0.0;
  return Polytope::box(lo, Eigen::VectorXd::Ones(m));
}

/// R^n x U as a polytope over (x, u).
Polytope inputs_only(int n, const Polytope& U) {
  return cartesian_product(Polytope::whole_space(n), U);
}

}  // namespace

ScenarioSpec small_scale_scenario(double epsilon, int N) {
  ScenarioSpec s;
  s.name = "smallscale";
  s.A.resize(2, 2);
  s.A << 0.9, 0.0, 0.2, 0.8;
  s.B = Eigen::MatrixXd::Identity(2, 2);
  s.G = Eigen::MatrixXd::Identity(2, 2);
  s.Q = Eigen::Vector2d(0.1, 10.0).asDiagonal();
  s.R = Eigen::Vector2d(10.0, 0.1).asDiagonal();
  s.P = solve_dlyap(s.A, s.Q);
  s.N = N;
  s.U = asymmetric_input_box(2);
  s.Z = inputs_only(2, s.U);
  s.Xf = Polytope::whole_space(2);
  s.W = Polytope::symmetric_box(2, 1.0);
  s.d.epsilon = epsilon;
  s.d.sigma_hat = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  return s;
}

Eigen::MatrixXd small_scale_true_covariance() {
  Eigen::MatrixXd S(2, 2);
  S << 0.01, 0.01, 0.01, 0.035;
  return S;
}

ScenarioSpec dare_interior_scenario(double epsilon, int N) {
  ScenarioSpec s = small_scale_scenario(epsilon, N);
  s.name = "dare_interior";
  const TerminalIngredients ti = solve_dare(s.A, s.B, s.Q, s.R);
  s.P = ti.P;
  s.terminal_gain = ti.K;
  s.U = Polytope::symmetric_box(2, 1.0);
  s.Z = inputs_only(2, s.U);
  s.W = Polytope::symmetric_box(2, 0.1);
  s.d.sigma_hat = 5e-4 * Eigen::MatrixXd::Identity(2, 2);
  Polytope admissible;
  admissible.H.resize(2 * ti.K.rows(), 2);
  admissible.H << ti.K, -ti.K;
  admissible.h = Eigen::VectorXd::Ones(admissible.H.rows());
  s.Xf = invariant_subset(s.A + s.B * ti.K, s.G, s.W, admissible);
  return s;
}

Eigen::MatrixXd dare_interior_true_covariance() {
  return Eigen::Vector2d(1e-3, 2e-3).asDiagonal();
}

ScenarioSpec large_scale_scenario(std::uint64_t seed, int N) {
  const int n = 20, m = 3, q = 2, p = 3;
  Rng rng(seed);
  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) M(i, j) = rng.normal();
    return M;
  };
  // Slow, lightly damped modes (radii 0.80..0.97) mixed by a well-conditioned similarity.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < n / 2; ++b) {
    const double r = rng.uniform(0.80, 0.97);
    const double th = rng.uniform(0.0, 0.3);
    D(2 * b, 2 * b) = r * std::cos(th);
    D(2 * b, 2 * b + 1) = -r * std::sin(th);
    D(2 * b + 1, 2 * b) = r * std::sin(th);
    D(2 * b + 1, 2 * b + 1) = r * std::cos(th);
  }
  const Eigen::MatrixXd T = Eigen::MatrixXd::Identity(n, n) + 0.15 * randn(n, n);
  ScenarioSpec s;
  s.name = "largescale";
  s.A = T * D * T.inverse();
  s.B = randn(n, m) / std::sqrt(static_cast<double>(n));
  s.G = randn(n, q) / std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd C = randn(p, n) / std::sqrt(static_cast<double>(n));
  const Eigen::Vector3d qy(20.0, 10.0, 1.0);
  s.Q = C.transpose() * qy.asDiagonal() * C;
  s.Q = 0.5 * (s.Q + s.Q.transpose());
  s.R = 0.1 * Eigen::MatrixXd::Identity(m, m);
  s.P = solve_dlyap(s.A, s.Q);
  s.N = N;
  s.U = asymmetric_input_box(m);
  s.Z = inputs_only(n, s.U);
  s.Xf = Polytope::whole_space(n);
  s.W = Polytope::symmetric_box(q, 1.0);
  s.d.epsilon = 0.1;
  s.d.sigma_hat = 0.01 * Eigen::MatrixXd::Identity(q, q);
  return s;
}

Eigen::MatrixXd large_scale_true_covariance() {
  return Eigen::Vector2d(0.04, 0.01).asDiagonal();
}

}  // namespace drmpc
