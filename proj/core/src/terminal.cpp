#include "drmpc/terminal.hpp"

#include "drmpc/linalg.hpp"
#include "drmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drmpc {

const char* to_string(TerminalKind k) {
  switch (k) {
    case TerminalKind::kLyapunov: return "lyapunov";
    case TerminalKind::kDare: return "dare";
    case TerminalKind::kUser: return "user";
  }
  return "unknown";
}

Eigen::MatrixXd solve_dlyap(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  if (A.rows() != A.cols()) throw std::invalid_argument("dlyap: A must be square");
  if (Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw std::invalid_argument("dlyap: Q must match A, got " + shape_string(Q));
  }
  const double rho = spectral_radius(A);
  if (rho >= 1.0 - 1e-9) {
    std::ostringstream os;
    os << "dlyap: A is not Schur stable (spectral radius " << rho << ")";
    throw std::invalid_argument(os.str());
  }
  const Eigen::Index n = A.rows();
  // vec(A'PA) = (A' kron A') vec(P)
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) -= A(j, i) * A.transpose();
    }
  }
  const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  const Eigen::VectorXd pv = K.partialPivLu().solve(qv);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(pv.data(), n, n);
  return 0.5 * (P + P.transpose());
}

double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  const Eigen::MatrixXd S = R + B.transpose() * P * B;
  const Eigen::MatrixXd rhs =
      A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA) + Q;
  return (P - rhs).norm() / std::max(1.0, P.norm());
}

TerminalIngredients solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw std::invalid_argument("dare: inconsistent dimensions");
  }
  require_psd(Q, "Q");
  require_pd(R, "R");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd Ak = A;
  Eigen::MatrixXd Gk = B * R.ldlt().solve(B.transpose());
  Gk = 0.5 * (Gk + Gk.transpose());
  Eigen::MatrixXd Hk = 0.5 * (Q + Q.transpose());
  int it = 0;
  for (; it < 200; ++it) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> W(I + Gk * Hk);
    const Eigen::MatrixXd WA = W.solve(Ak);
    const Eigen::MatrixXd WG = W.solve(Gk);
    const Eigen::MatrixXd A1 = Ak * WA;
    Eigen::MatrixXd G1 = Gk + Ak * WG * Ak.transpose();
    Eigen::MatrixXd H1 = Hk + Ak.transpose() * Hk * WA;
    G1 = 0.5 * (G1 + G1.transpose());
    H1 = 0.5 * (H1 + H1.transpose());
    if (!H1.allFinite()) break;
    const double change = (H1 - Hk).norm();
    Ak = A1;
    Gk = G1;
    Hk = H1;
    if (change <= 1e-15 * std::max(1.0, Hk.norm())) break;
  }
  TerminalIngredients ti;
  ti.kind = TerminalKind::kDare;
  ti.P = Hk;
  if (!ti.P.allFinite()) throw std::runtime_error("dare: doubling iteration diverged");
  const Eigen::MatrixXd S = R + B.transpose() * ti.P * B;
  ti.K = -S.ldlt().solve(B.transpose() * ti.P * A);
  const double res = dare_residual(A, B, Q, R, ti.P);
  const double rho = spectral_radius(A + B * ti.K);
  if (!(res <= 1e-10) || !(rho < 1.0)) {
    std::ostringstream os;
    os << "dare: no stabilizing solution (residual " << res << ", closed-loop spectral radius "
       << rho << ", " << it << " doubling steps)";
    throw std::runtime_error(os.str());
  }
  return ti;
}

namespace {

double safe_support(const Polytope& P, const Eigen::VectorXd& a) {
  try {
    return support_function(P, a);
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Polytope invariant_subset(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& G, const Polytope& W,
                          const Polytope& start, int max_iter) {
  if (Acl.rows() != Acl.cols() || start.dim() != Acl.rows() || G.rows() != Acl.rows() ||
      W.dim() != G.cols()) {
    throw std::invalid_argument("invariant_subset: inconsistent dimensions");
  }
  Polytope X = start;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd Hpre = X.H * Acl;
    Eigen::VectorXd hpre(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      hpre(i) = X.h(i) - support_function(W, G.transpose() * X.H.row(i).transpose());
    }
    std::vector<Eigen::Index> added;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (Hpre.row(i).cwiseAbs().maxCoeff() == 0.0) {
        if (hpre(i) < 0.0) throw std::runtime_error("invariant_subset: set became empty");
        continue;
      }
      double reach = std::numeric_limits<double>::infinity();
      try {
        reach = support_function(X, Hpre.row(i).transpose());
      } catch (const std::domain_error&) {
      }
      if (reach > hpre(i) + 1e-9) added.push_back(i);
    }
    if (added.empty()) return X;
    Polytope next;
    next.H.resize(X.rows() + static_cast<Eigen::Index>(added.size()), X.dim());
    next.h.resize(next.H.rows());
    next.H.topRows(X.rows()) = X.H;
    next.h.head(X.rows()) = X.h;
    for (size_t k = 0; k < added.size(); ++k) {
      const auto r = X.rows() + static_cast<Eigen::Index>(k);
      next.H.row(r) = Hpre.row(added[k]);
      next.h(r) = hpre(added[k]);
    }
    try {
      X = remove_redundant_rows(next);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("invariant_subset: set became empty");
    }
  }
  throw std::runtime_error("invariant_subset: no convergence after " + std::to_string(max_iter) +
                           " passes");
}

TerminalReport verify_terminal(const ScenarioSpec& spec, const TerminalIngredients& ti) {
  spec.validate_dimensions();
  TerminalReport rep;
  const Eigen::MatrixXd Acl = spec.A + spec.B * ti.K;

  const Eigen::MatrixXd dec = ti.P - spec.Q - ti.K.transpose() * spec.R * ti.K -
                              Acl.transpose() * ti.P * Acl;
  const double lo = min_eigenvalue(dec);
  rep.decrease.margin = -lo;
  rep.decrease.passed = lo >= -1e-9 * std::max(1.0, ti.P.norm());
  rep.decrease.detail = "min eigenvalue of the decrease residual";

  // Invariance: max over Xf of f'(A+BK)x plus max over W of f'Gw, per Xf row.
  double inv = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spec.Xf.rows(); ++i) {
    const Eigen::VectorXd f = spec.Xf.H.row(i).transpose();
    const double v = safe_support(spec.Xf, Acl.transpose() * f) +
                     support_function(spec.W, spec.G.transpose() * f) - spec.Xf.h(i);
    inv = std::max(inv, v);
  }
  rep.invariance.margin = spec.Xf.rows() ? inv : 0.0;
  rep.invariance.passed = rep.invariance.margin <= 1e-9;
  rep.invariance.detail = "largest row violation of (A+BK)Xf + GW within Xf";

  const int n = spec.n();
  double adm = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spec.Z.rows(); ++i) {
    const Eigen::RowVectorXd row = spec.Z.H.row(i).head(n) + spec.Z.H.row(i).tail(spec.m()) * ti.K;
    adm = std::max(adm, safe_support(spec.Xf, row.transpose()) - spec.Z.h(i));
  }
  for (Eigen::Index i = 0; i < spec.U.rows(); ++i) {
    const Eigen::RowVectorXd row = spec.U.H.row(i) * ti.K;
    adm = std::max(adm, safe_support(spec.Xf, row.transpose()) - spec.U.h(i));
  }
  rep.admissibility.margin = (spec.Z.rows() + spec.U.rows()) ? adm : 0.0;
  rep.admissibility.passed = rep.admissibility.margin <= 1e-9;
  rep.admissibility.detail = "largest row violation of (x, Kx) in Z and Kx in U over Xf";

  const double hmin = spec.Xf.rows() ? spec.Xf.h.minCoeff() : std::numeric_limits<double>::infinity();
  rep.interior.margin = 1e-9 - hmin;
  rep.interior.passed = hmin >= 1e-9;
  rep.interior.detail = "smallest right-hand side of Xf";
  return rep;
}

TerminalCostComparison compare_terminal_costs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                              const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q,
                                              const Eigen::MatrixXd& R,
                                              const Eigen::MatrixXd& Sigma) {
  TerminalCostComparison out;
  const TerminalIngredients dare = solve_dare(A, B, Q, R);
  out.dare_value = (G.transpose() * dare.P * G * Sigma).trace();
  if (spectral_radius(A) < 1.0 - 1e-9) {
    const Eigen::MatrixXd Pl = solve_dlyap(A, Q);
    out.lyap_value = (G.transpose() * Pl * G * Sigma).trace();
    out.lyap_available = true;
    out.holds = out.dare_value <= out.lyap_value + 1e-9;
  }
  return out;
}

}  // namespace drmpc
