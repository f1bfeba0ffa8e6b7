#include "drmpc/ambiguity.hpp"

#include "drmpc/linalg.hpp"
#include "drmpc/random.hpp"
#include "drmpc/reference_scenarios.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace drmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd random_psd(Rng& rng, int q, double scale) {
  MatrixXd L(q, q);
  for (int j = 0; j < q; ++j) {
    for (int i = 0; i < q; ++i) L(i, j) = rng.normal();
  }
  return scale * L * L.transpose();
}

AmbiguityParams params(double eps, const MatrixXd& S) {
  AmbiguityParams d;
  d.epsilon = eps;
  d.sigma_hat = S;
  return d;
}

TEST(Ambiguity, ZeroRadiusReturnsNominal) {
  Rng rng(1);
  const MatrixXd Z = random_psd(rng, 3, 1.0);
  const MatrixXd S = random_psd(rng, 3, 0.1);
  const InnerMaxResult r = worst_case_block(Z, params(0.0, S));
  EXPECT_LE((r.sigma - S).norm(), 1e-12);
  EXPECT_NEAR(r.value, (Z * S).trace(), 1e-12);
}

TEST(Ambiguity, IsotropicClosedForm) {
  for (int q : {1, 2, 3}) {
    for (double sigma : {0.05, 0.1, 0.7}) {
      for (double eps : {0.01, 0.1, 1.0}) {
        const MatrixXd I = MatrixXd::Identity(q, q);
        const InnerMaxResult r = worst_case_block(I, params(eps, sigma * sigma * I), 1e-13);
        const double value = std::pow(std::sqrt(double(q)) * sigma + eps, 2);
        EXPECT_NEAR(r.value, value, 1e-10 * value);
        const double s = sigma + eps / std::sqrt(double(q));
        EXPECT_LE((r.sigma - s * s * I).norm(), 1e-8);
      }
    }
  }
}

TEST(Ambiguity, IsotropicClosedFormMatchesRadialGridSearch) {
  // Over radial covariances s^2 I the Gelbrich distance to sigma^2 I is sqrt(q)|s - sigma|, so
  // tr(S) is maximized at the largest admissible s.
  const int q = 2;
  const double sigma = 0.1, eps = 0.3;
  double best = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double s = 2.0 * i / 200000.0;
    const MatrixXd S = s * s * MatrixXd::Identity(q, q);
    if (gelbrich_distance_sq(S, sigma * sigma * MatrixXd::Identity(q, q)) <= eps * eps) {
      best = std::max(best, S.trace());
    }
  }
  EXPECT_NEAR(best, std::pow(std::sqrt(2.0) * sigma + eps, 2), 1e-4);
}

TEST(Ambiguity, SingularNominalGivesRankOneExtreme) {
  MatrixXd Z = MatrixXd::Zero(2, 2);
  Z.diagonal() << 2.0, 1.0;
  const InnerMaxResult r = worst_case_block(Z, params(0.5, MatrixXd::Zero(2, 2)));
  EXPECT_NEAR(r.value, 0.5, 1e-12);
  MatrixXd expected = MatrixXd::Zero(2, 2);
  expected(0, 0) = 0.25;
  EXPECT_LE((r.sigma - expected).norm(), 1e-12);
}

TEST(Ambiguity, ZeroCostMatrixReturnsNominal) {
  const MatrixXd S = 0.01 * MatrixXd::Identity(2, 2);
  const InnerMaxResult r = worst_case_block(MatrixXd::Zero(2, 2), params(0.1, S));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_LE((r.sigma - S).norm(), 1e-15);
}

TEST(Ambiguity, RejectsBadInput) {
  MatrixXd Z = MatrixXd::Identity(2, 2);
  Z(0, 1) = 1.0;
  EXPECT_THROW(worst_case_block(Z, params(0.1, MatrixXd::Identity(2, 2))), std::invalid_argument);
  EXPECT_THROW(worst_case_block(MatrixXd::Identity(2, 2), params(0.1, MatrixXd::Identity(2, 2)), 0.0),
               std::invalid_argument);
}

TEST(Ambiguity, MatchesProjectedGradientOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int q = 2 + trial % 2;
    const MatrixXd Z = random_psd(rng, q, 1.0);
    const MatrixXd S = random_psd(rng, q, 0.02) + 1e-3 * MatrixXd::Identity(q, q);
    const double eps = rng.uniform(0.01, 1.0);
    const InnerMaxResult r = worst_case_block(Z, params(eps, S), 1e-12);
    const double oracle = testing::pga_inner_max(Z, S, eps);
    EXPECT_NEAR(r.value, oracle, 1e-6 * oracle) << "trial " << trial;
    // The maximizer is feasible and attains the value.
    EXPECT_LE(gelbrich_distance_sq(r.sigma, S), eps * eps + 1e-8);
    EXPECT_NEAR((Z * r.sigma).trace(), r.value, 1e-9 * (1.0 + r.value));
    EXPECT_LE(r.gap, 1e-12 * std::max(1.0, r.value) + 1e-12);
  }
}

TEST(Ambiguity, ValueIsMonotoneInRadius) {
  Rng rng(3);
  const MatrixXd Z = random_psd(rng, 3, 1.0);
  const MatrixXd S = random_psd(rng, 3, 0.01);
  double prev = -1.0;
  for (int i = 0; i <= 40; ++i) {
    const double v = worst_case_block(Z, params(0.05 * i, S), 1e-12).value;
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(Ambiguity, ObjectiveReductions) {
  const ScenarioSpec spec = small_scale_scenario(0.0, 6);
  const StackedProblem sp = assemble_stacked(spec, Eigen::Vector2d(1.0, 1.0));
  const PolicyParams theta = testing::random_policy(4, 6, 2, 2);

  const WorstCaseResult smpc = worst_case_objective(sp, theta, spec.d);
  const double L = expected_cost(sp, theta, BlockCovariance::repeat(spec.d.sigma_hat, 6));
  EXPECT_NEAR(smpc.f, L, 1e-12 * L);

  AmbiguityParams none;
  none.sigma_hat = MatrixXd::Zero(2, 2);
  const WorstCaseResult rmpc = worst_case_objective(sp, theta, none);
  EXPECT_NEAR(rmpc.f, (sp.Hx * sp.x + sp.Hu * theta.v).squaredNorm(), 1e-12 * (1.0 + rmpc.f));
  EXPECT_EQ(worst_case_gradient(sp, theta, none).M.norm(), 0.0);

  const PolicyParams g = worst_case_gradient(sp, theta, spec.d);
  const PolicyParams gL = cost_gradient(sp, theta, BlockCovariance::repeat(spec.d.sigma_hat, 6));
  EXPECT_LE((g - gL).squared_norm(), 1e-20 * (1.0 + gL.squared_norm()));
}

TEST(Ambiguity, ObjectiveAtZeroPolicyMatchesOracle) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 10);
  const StackedProblem sp = assemble_stacked(spec, Eigen::Vector2d(1.0, 1.0));
  const PolicyParams zero = PolicyParams::zero(10, 2, 2);
  const WorstCaseResult wc = worst_case_objective(sp, zero, spec.d, 1e-12);
  double oracle = (sp.Hx * sp.x).squaredNorm();
  for (int k = 0; k < 10; ++k) {
    oracle += testing::pga_inner_max(sp.z_block(zero.M, k), spec.d.sigma_hat, spec.d.epsilon);
  }
  EXPECT_NEAR(wc.f, oracle, 1e-6 * oracle);
}

TEST(Ambiguity, GradientMatchesFiniteDifferences) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 10);
  const StackedProblem sp = assemble_stacked(spec, Eigen::Vector2d(1.0, 1.0));
  const PolicyParams theta = testing::random_policy(9, 10, 2, 2, 0.3);
  const PolicyParams g = worst_case_gradient(sp, theta, spec.d, 1e-13);
  auto f = [&](const PolicyParams& t) { return worst_case_objective(sp, t, spec.d, 1e-13).f; };
  for (int i = 0; i < 20; ++i) {
    const PolicyParams d = testing::random_policy(500 + i, 10, 2, 2, 1.0);
    const double fd = testing::central_difference(f, theta, d);
    const double an = g.dot(d);
    EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(std::abs(an), 1.0)) << "direction " << i;
  }
}

TEST(Ambiguity, ObjectiveIsConvex) {
  const ScenarioSpec spec = small_scale_scenario(0.3, 6);
  const StackedProblem sp = assemble_stacked(spec, Eigen::Vector2d(-0.5, 1.0));
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const PolicyParams a = testing::random_policy(2 * i, 6, 2, 2);
    const PolicyParams b = testing::random_policy(2 * i + 1, 6, 2, 2);
    const double t = rng.uniform();
    const double mid = worst_case_objective(sp, t * a + (1 - t) * b, spec.d).f;
    const double chord =
        t * worst_case_objective(sp, a, spec.d).f + (1 - t) * worst_case_objective(sp, b, spec.d).f;
    EXPECT_LE(mid, chord + 1e-9 * (1.0 + chord));
  }
}

TEST(Ambiguity, MembershipCheck) {
  const Polytope W = Polytope::symmetric_box(2, 1.0);
  EXPECT_EQ(check_membership_D(W, params(0.1, 0.01 * MatrixXd::Identity(2, 2))), Membership::kOk);
  EXPECT_EQ(check_membership_D(W, params(0.0, MatrixXd::Zero(2, 2))), Membership::kOk);
  // sqrt(3) * row l1 norm of the root is 1.2 sqrt(3) > 1: some sample leaves W.
  EXPECT_EQ(check_membership_D(W, params(0.0, 0.36 * MatrixXd::Identity(2, 2)) ),
            Membership::kReject);
  // Nominal fine, but the inflated ball is not certified.
  EXPECT_NE(check_membership_D(W, params(1.0, 0.01 * MatrixXd::Identity(2, 2))), Membership::kOk);
}

}  // namespace
}  // namespace drmpc
