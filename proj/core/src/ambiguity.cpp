#include "drmpc/ambiguity.hpp"

#include "drmpc/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drmpc {

double gelbrich_distance_sq(const Eigen::MatrixXd& S1, const Eigen::MatrixXd& S2) {
  const Eigen::MatrixXd r2 = sym_sqrt(S2);
  const Eigen::MatrixXd cross = sym_sqrt(r2 * S1 * r2);
  return (S1 + S2 - 2.0 * cross).trace();
}

namespace {

struct Spectral {
  Eigen::VectorXd lambda;  // ascending
  Eigen::MatrixXd U;
  Eigen::MatrixXd S;       // U' sigma_hat U
  Eigen::VectorXd s;       // diag(S)
};

Eigen::MatrixXd recover(const Spectral& sp, double gamma, const std::vector<bool>& drop) {
  const Eigen::Index q = sp.lambda.size();
  Eigen::VectorXd D(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    D(i) = drop[static_cast<size_t>(i)] ? 0.0 : gamma / (gamma - sp.lambda(i));
  }
  Eigen::MatrixXd inner = D.asDiagonal() * sp.S * D.asDiagonal();
  Eigen::MatrixXd out = sp.U * inner * sp.U.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

InnerMaxResult worst_case_block(const Eigen::MatrixXd& Z, const AmbiguityParams& d, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("worst_case_block: tol must be positive");
  if (Z.rows() != Z.cols() || !is_symmetric(Z, 1e-9)) {
    throw std::invalid_argument("worst_case_block: Z must be symmetric");
  }
  if (d.sigma_hat.rows() != Z.rows() || d.sigma_hat.cols() != Z.cols()) {
    throw std::invalid_argument("worst_case_block: sigma_hat has wrong shape " +
                                shape_string(d.sigma_hat));
  }
  const Eigen::MatrixXd Zs = 0.5 * (Z + Z.transpose());
  const Eigen::MatrixXd Sh = 0.5 * (d.sigma_hat + d.sigma_hat.transpose());
  const double eps2 = d.epsilon * d.epsilon;

  InnerMaxResult out;
  const double sh_max = std::max(max_eigenvalue(Sh), 0.0);
  out.unique = min_eigenvalue(Sh) > 1e-12 * std::max(1.0, sh_max);

  if (d.epsilon == 0.0) {
    out.sigma = Sh;
    out.value = (Zs.cwiseProduct(Sh)).sum();
    out.gamma = std::numeric_limits<double>::infinity();
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Zs);
  Spectral sp{es.eigenvalues(), es.eigenvectors(), {}, {}};
  sp.S = sp.U.transpose() * Sh * sp.U;
  sp.s = sp.S.diagonal().cwiseMax(0.0);
  const Eigen::Index q = sp.lambda.size();
  const double lmax = sp.lambda(q - 1);
  const double zscale = std::max(std::abs(lmax), std::abs(sp.lambda(0)));

  if (lmax <= 1e-14 * std::max(1.0, zscale) || zscale == 0.0) {
    // Z is zero (or negative semidefinite): the nominal covariance is a maximizer.
    out.sigma = Sh;
    out.value = (Zs.cwiseProduct(Sh)).sum();
    out.gamma = std::numeric_limits<double>::infinity();
    out.unique = false;
    return out;
  }

  // Top eigenspace and the weight the nominal covariance puts on it.
  std::vector<bool> top(static_cast<size_t>(q), false);
  double top_weight = 0.0;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (lmax - sp.lambda(i) <= 1e-12 * std::max(1.0, lmax)) {
      top[static_cast<size_t>(i)] = true;
      top_weight += sp.s(i) * sp.lambda(i) * sp.lambda(i);
    }
  }
  const double sscale = std::max(1.0, sh_max) * lmax * lmax;

  auto dprime = [&](double gamma, const std::vector<bool>& skip) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (skip[static_cast<size_t>(i)]) continue;
      const double r = sp.lambda(i) / (gamma - sp.lambda(i));
      acc += sp.s(i) * r * r;
    }
    return eps2 - acc;
  };
  auto primal = [&](double gamma, const std::vector<bool>& skip) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (skip[static_cast<size_t>(i)]) continue;
      const double r = gamma / (gamma - sp.lambda(i));
      acc += sp.lambda(i) * sp.s(i) * r * r;
    }
    return acc;
  };

  if (top_weight <= 1e-14 * sscale) {
    const double slack = dprime(lmax, top);
    if (slack >= 0.0) {
      // The multiplier sits at lambda_max: spend the remaining radius on a top eigenvector.
      Eigen::MatrixXd sigma = recover(sp, lmax, top);
      Eigen::Index u_idx = q - 1;
      sigma += slack * sp.U.col(u_idx) * sp.U.col(u_idx).transpose();
      out.sigma = 0.5 * (sigma + sigma.transpose());
      out.value = primal(lmax, top) + slack * lmax;
      out.gamma = lmax;
      out.gap = 0.0;
      out.unique = false;
      return out;
    }
  }

  const std::vector<bool> none(static_cast<size_t>(q), false);
  double lo = lmax * (1.0 + 1e-12) + 1e-14;
  double hi = std::max(2.0 * lo, lmax + 1.0);
  int doublings = 0;
  while (dprime(hi, none) <= 0.0) {
    if (++doublings > 200) {
      out.sigma = Sh;
      out.value = (Zs.cwiseProduct(Sh)).sum();
      out.gamma = std::numeric_limits<double>::infinity();
      return out;
    }
    lo = hi;
    hi *= 2.0;
  }

  // g is convex on (lambda_max, inf) and the primal-dual gap at gamma equals gamma * g'(gamma),
  // so bisecting g' from above keeps the recovered covariance feasible.
  int it = 0;
  while (hi * dprime(hi, none) > tol && it < 400) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (dprime(mid, none) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++it;
  }
  out.gamma = hi;
  out.iterations = it;
  out.gap = hi * dprime(hi, none);
  out.sigma = recover(sp, hi, none);
  out.value = primal(hi, none);
  return out;
}

WorstCaseResult worst_case_objective(const StackedProblem& sp, const PolicyParams& theta,
                                     const AmbiguityParams& d, double tol) {
  WorstCaseResult out;
  const Eigen::VectorXd nominal = sp.Hx * sp.x + sp.Hu * theta.v;
  out.f = nominal.squaredNorm();
  out.sigma.blocks.reserve(static_cast<size_t>(sp.N));
  out.blocks.reserve(static_cast<size_t>(sp.N));
  for (int k = 0; k < sp.N; ++k) {
    InnerMaxResult r = worst_case_block(sp.z_block(theta.M, k), d, tol);
    out.f += r.value;
    out.unique = out.unique && r.unique;
    out.sigma.blocks.push_back(r.sigma);
    out.blocks.push_back(std::move(r));
  }
  return out;
}

PolicyParams worst_case_gradient(const StackedProblem& sp, const PolicyParams& theta,
                                 const AmbiguityParams& d, double tol, WorstCaseResult* at) {
  WorstCaseResult wc = worst_case_objective(sp, theta, d, tol);
  PolicyParams g = cost_gradient(sp, theta, wc.sigma);
  if (at != nullptr) *at = std::move(wc);
  return g;
}

const char* to_string(Membership m) {
  switch (m) {
    case Membership::kOk: return "ok";
    case Membership::kConservativeOk: return "conservative-ok";
    case Membership::kReject: return "reject";
  }
  return "unknown";
}

Membership check_membership_D(const Polytope& W, const AmbiguityParams& d) {
  d.validate();
  const auto bounds = W.symmetric_box_bounds();
  if (!bounds) return Membership::kConservativeOk;
  const double b = bounds->minCoeff();
  const double sqrt3 = std::sqrt(3.0);
  const Eigen::MatrixXd root = sym_sqrt(d.sigma_hat);
  const double nominal_row = root.size() ? root.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  if (sqrt3 * nominal_row > b) return Membership::kReject;
  if (d.epsilon == 0.0) return Membership::kOk;
  // Every S in the ball has tr(S)^1/2 <= tr(sigma_hat)^1/2 + eps, and the rows of S^1/2 have
  // l1 norm at most sqrt(q) times the Frobenius norm tr(S)^1/2.
  const double radius = std::sqrt(std::max(d.sigma_hat.trace(), 0.0)) + d.epsilon;
  const double q = static_cast<double>(d.sigma_hat.rows());
  if (sqrt3 * std::sqrt(q) * radius <= b) return Membership::kOk;
  return Membership::kConservativeOk;
}

double estimate_smoothness(const StackedProblem& sp, const BlockCovariance& sigma) {
  double smax = 0.0;
  for (const auto& b : sigma.blocks) smax = std::max(smax, max_eigenvalue(b));
  return 2.0 * max_eigenvalue(sp.Huu) * std::max(1.0, smax);
}

double estimate_smoothness_over_ball(const StackedProblem& sp, const AmbiguityParams& d, int N) {
  const auto q = d.sigma_hat.rows();
  const double r = std::sqrt(std::max(0.0, max_eigenvalue(d.sigma_hat))) + d.epsilon;
  return estimate_smoothness(sp, BlockCovariance::repeat(r * r * Eigen::MatrixXd::Identity(q, q), N));
}

}  // namespace drmpc
