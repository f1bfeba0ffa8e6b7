#include "drmpc/sets.hpp"

#include "drmpc/random.hpp"
#include "drmpc/reference_scenarios.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace drmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Vertices of a bounded 3-dim polytope by solving every triple of rows.
std::vector<VectorXd> enumerate_vertices(const Polytope& P) {
  std::vector<VectorXd> out;
  const int r = static_cast<int>(P.rows());
  for (int a = 0; a < r; ++a) {
    for (int b = a + 1; b < r; ++b) {
      for (int c = b + 1; c < r; ++c) {
        Eigen::Matrix3d M;
        M << P.H.row(a), P.H.row(b), P.H.row(c);
        Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
        if (lu.rank() < 3) continue;
        const VectorXd v = lu.solve(Eigen::Vector3d(P.h(a), P.h(b), P.h(c)));
        if (P.contains(v, 1e-9)) out.push_back(v);
      }
    }
  }
  return out;
}

double row_lhs(const ScenarioSpec& spec, const RobustRow& row, const testing::Trajectory& t) {
  switch (row.source) {
    case RobustRow::Source::kZ: {
      VectorXd xu(spec.n() + spec.m());
      xu << t.x.col(row.step), t.u.col(row.step);
      return spec.Z.H.row(row.source_row).dot(xu);
    }
    case RobustRow::Source::kU:
      return spec.U.H.row(row.source_row).dot(t.u.col(row.step));
    case RobustRow::Source::kXf:
      return spec.Xf.H.row(row.source_row).dot(t.x.col(row.step));
  }
  return 0.0;
}

// A disturbance in the box W^N with a bias toward vertices.
VectorXd sample_box(Rng& rng, Eigen::Index dim, double bound) {
  VectorXd w(dim);
  const bool vertex = rng.uniform() < 0.5;
  for (Eigen::Index i = 0; i < dim; ++i) {
    w(i) = vertex ? (rng.uniform() < 0.5 ? -bound : bound) : rng.uniform(-bound, bound);
  }
  return w;
}

// Feasible points as random convex combinations of LP vertices.
std::vector<PolicyParams> feasible_points(const LiftedPolicySet& set, const VectorXd& x, int count,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PolicyParams> vertices;
  for (int i = 0; i < 12; ++i) {
    VectorXd c(set.num_variables());
    for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = rng.normal();
    c.tail(set.num_aux()).setZero();
    const QpSolution sol = solve_lp(c, set, x);
    EXPECT_TRUE(sol.optimal());
    vertices.push_back(set.unpack(sol.z));
  }
  std::vector<PolicyParams> out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> wts(vertices.size());
    double total = 0.0;
    for (auto& w : wts) total += (w = -std::log(1.0 - rng.uniform()));
    PolicyParams p = 0.0 * vertices[0];
    for (size_t j = 0; j < vertices.size(); ++j) p += (wts[j] / total) * vertices[j];
    out.push_back(p);
  }
  return out;
}

TEST(Polytope, SupportBoxClosedForm) {
  const Polytope box = Polytope::symmetric_box(2, 1.0);
  EXPECT_DOUBLE_EQ(support_function(box, Eigen::Vector2d(1.0, -2.0)), 3.0);
  EXPECT_DOUBLE_EQ(support_function(box, Eigen::Vector2d::Zero()), 0.0);
}

TEST(Polytope, SupportMatchesVertexEnumeration) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    // Random directions plus a box keep the polytope bounded.
    MatrixXd H(14, 3);
    VectorXd h(14);
    H.topRows(6) << MatrixXd::Identity(3, 3), -MatrixXd::Identity(3, 3);
    h.head(6).setConstant(2.0);
    for (int i = 6; i < 14; ++i) {
      H.row(i) = Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
      h(i) = rng.uniform(0.5, 1.5);
    }
    const Polytope P(H, h);
    const auto vertices = enumerate_vertices(P);
    ASSERT_FALSE(vertices.empty());
    for (int d = 0; d < 50; ++d) {
      const VectorXd a = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      double best = -1e300;
      for (const auto& v : vertices) best = std::max(best, a.dot(v));
      EXPECT_NEAR(support_function(P, a), best, 1e-8 * (1.0 + std::abs(best)));
    }
  }
}

TEST(Polytope, UnboundedDirectionThrows) {
  const Polytope half(MatrixXd::Identity(1, 1), VectorXd::Ones(1));
  EXPECT_THROW(support_function(half, -VectorXd::Ones(1)), std::domain_error);
  EXPECT_FALSE(is_bounded(half));
}

TEST(Polytope, RedundantRowsRemoved) {
  MatrixXd H(5, 2);
  H << 1, 0, -1, 0, 0, 1, 0, -1, 1, 1;
  VectorXd h(5);
  h << 1, 1, 1, 1, 5;
  const Polytope P = remove_redundant_rows(Polytope(H, h));
  EXPECT_EQ(P.rows(), 4);
}

TEST(PolicySet, SingleStepReducesToInputSet) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 1);
  const StackedProblem sp = assemble_stacked(spec, Eigen::Vector2d(1.0, 1.0));
  const LiftedPolicySet set = build_policy_set(spec, sp);
  EXPECT_EQ(set.num_m(), 0);
  // Support of the lifted set in v matches U = {|u| <= 1, u2 >= 0}.
  const VectorXd x(Eigen::Vector2d(1.0, 1.0));
  const double expect_max[2] = {1.0, 1.0};
  const double expect_min[2] = {-1.0, 0.0};
  for (int i = 0; i < 2; ++i) {
    VectorXd c = VectorXd::Zero(set.num_variables());
    c(i) = -1.0;
    EXPECT_NEAR(-solve_lp(c, set, x).objective, expect_max[i], 1e-9);
    c(i) = 1.0;
    EXPECT_NEAR(solve_lp(c, set, x).objective, expect_min[i], 1e-9);
  }
}

TEST(PolicySet, SmallScaleSetIsBounded) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 10);
  const VectorXd x(Eigen::Vector2d(1.0, 1.0));
  const LiftedPolicySet set = build_policy_set(spec, assemble_stacked(spec, x));
  const Eigen::Index nt = set.num_v() + set.num_m();
  double largest = 0.0;
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (double sign : {1.0, -1.0}) {
      VectorXd c = VectorXd::Zero(set.num_variables());
      c(i) = -sign;
      const QpSolution sol = solve_lp(c, set, x);
      ASSERT_TRUE(sol.optimal()) << "coordinate " << i;
      largest = std::max(largest, std::abs(sol.objective));
    }
  }
  EXPECT_LT(largest, 1e3);
}

TEST(PolicySet, LiftedFeasibleIsRobustlyFeasible) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 10);
  const VectorXd x(Eigen::Vector2d(1.0, 1.0));
  const LiftedPolicySet set = build_policy_set(spec, assemble_stacked(spec, x));
  const auto points = feasible_points(set, x, 200, 3);
  Rng rng(8);
  double worst = -1e300;
  for (const auto& theta : points) {
    EXPECT_LE(set.max_violation(x, theta), 1e-9);
    for (int j = 0; j < 500; ++j) {
      const VectorXd w = sample_box(rng, spec.N * spec.q(), 1.0);
      worst = std::max(worst, testing::max_trajectory_violation(spec, x, theta, w));
    }
  }
  EXPECT_LE(worst, 1e-7);
}

TEST(PolicySet, RobustRowsAreTight) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 10);
  const VectorXd x(Eigen::Vector2d(1.0, 1.0));
  const LiftedPolicySet set = build_policy_set(spec, assemble_stacked(spec, x));
  const auto points = feasible_points(set, x, 10, 5);
  Rng rng(13);
  for (const auto& theta : points) {
    for (size_t i = 0; i < set.robust_rows().size(); ++i) {
      const RobustRow& row = set.robust_rows()[i];
      const RowWorstCase wc = set.row_worst_case(i, x, theta);
      ASSERT_TRUE(spec.W.contains(wc.w.head(spec.q()), 1e-12));
      const double attained = row_lhs(spec, row, testing::rollout(spec, x, theta, wc.w));
      EXPECT_NEAR(attained, wc.value, 1e-7) << "row " << i;
      EXPECT_LE(wc.value, row.h + 1e-7);
      for (int j = 0; j < 20; ++j) {
        const VectorXd w = sample_box(rng, spec.N * spec.q(), 1.0);
        EXPECT_LE(row_lhs(spec, row, testing::rollout(spec, x, theta, w)), wc.value + 1e-9);
      }
    }
  }
}

TEST(PolicySet, MidpointsStayFeasible) {
  const ScenarioSpec spec = small_scale_scenario(0.1, 6);
  const VectorXd x(Eigen::Vector2d(-1.0, 0.5));
  const LiftedPolicySet set = build_policy_set(spec, assemble_stacked(spec, x));
  const auto points = feasible_points(set, x, 20, 9);
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    EXPECT_LE(set.max_violation(x, 0.5 * (points[i] + points[i + 1])), 1e-9);
  }
}

TEST(PolicySet, GeneralPolytopeDisturbanceMatchesBox) {
  // A box W written with an extra redundant row takes the general (dual multiplier) path; the
  // lifted set must describe the same policies as the l1 path.
  ScenarioSpec box = small_scale_scenario(0.1, 4);
  ScenarioSpec general = box;
  MatrixXd H(5, 2);
  H << 1, 0, -1, 0, 0, 1, 0, -1, 1, 1;
  VectorXd h(5);
  h << 1, 1, 1, 1, 3;
  general.W = Polytope(H, h);
  const VectorXd x(Eigen::Vector2d(1.0, 1.0));
  const LiftedPolicySet a = build_policy_set(box, assemble_stacked(box, x));
  const LiftedPolicySet b = build_policy_set(general, assemble_stacked(general, x));
  ASSERT_TRUE(a.box_disturbance());
  ASSERT_FALSE(b.box_disturbance());
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const PolicyParams theta = testing::random_policy(trial, 4, 2, 2, 0.3);
    EXPECT_NEAR(a.max_violation(x, theta), b.max_violation(x, theta), 1e-9);
    VectorXd c = VectorXd::Zero(a.num_v() + a.num_m());
    for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = rng.normal();
    VectorXd ca = VectorXd::Zero(a.num_variables()), cb = VectorXd::Zero(b.num_variables());
    ca.head(c.size()) = c;
    cb.head(c.size()) = c;
    EXPECT_NEAR(solve_lp(ca, a, x).objective, solve_lp(cb, b, x).objective, 1e-7);
  }
}

TEST(PolicySet, RandomScenariosRobustlyFeasible) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ScenarioSpec spec = testing::random_small(seed);
    const VectorXd x = VectorXd::Constant(spec.n(), 0.2);
    const LiftedPolicySet set = build_policy_set(spec, assemble_stacked(spec, x));
    const auto points = feasible_points(set, x, 5, seed);
    Rng rng(seed);
    for (const auto& theta : points) {
      for (int j = 0; j < 100; ++j) {
        const VectorXd w = sample_box(rng, spec.N * spec.q(), 1.0);
        EXPECT_LE(testing::max_trajectory_violation(spec, x, theta, w), 1e-7) << "seed " << seed;
      }
    }
  }
}

}  // namespace
}  // namespace drmpc
