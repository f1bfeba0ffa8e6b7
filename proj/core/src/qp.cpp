#include "drmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace drmpc {

namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqFactor = 1e3;

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double finite_inf_norm(const VectorXd& v) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) out = std::max(out, std::abs(v(i)));
  }
  return out;
}

double clamp_scaling(double s) {
  if (s < kMinScaling) return 1.0;
  return std::min(s, kMaxScaling);
}

VectorXd col_inf_norms(const SpMat& M) {
  VectorXd out = VectorXd::Zero(M.cols());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      out(it.col()) = std::max(out(it.col()), std::abs(it.value()));
    }
  }
  return out;
}

VectorXd row_inf_norms(const SpMat& M) {
  VectorXd out = VectorXd::Zero(M.rows());
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    }
  }
  return out;
}

/// In-place M <- diag(left) * M * diag(right).
void scale_in_place(SpMat& M, const VectorXd& left, const VectorXd& right) {
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      it.valueRef() *= left(it.row()) * right(it.col());
    }
  }
}

VectorXd project_box(const VectorXd& v, const VectorXd& l, const VectorXd& u) {
  return v.cwiseMax(l).cwiseMin(u);
}

bool is_equality(double l, double u) {
  return std::isfinite(l) && std::isfinite(u) && (u - l) <= 1e-12 * std::max(1.0, std::abs(l));
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kPrimalInfeasible: return "primal-infeasible";
    case QpStatus::kDualInfeasible: return "dual-infeasible";
    case QpStatus::kMaxIter: return "max-iter";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const Eigen::Index n = q.size();
  const Eigen::Index m = l.size();
  if (P.rows() != n || P.cols() != n) {
    throw std::invalid_argument("QpProblem: P must be " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  if (A.rows() != m || A.cols() != n) {
    throw std::invalid_argument("QpProblem: A must be " + std::to_string(m) + "x" +
                                std::to_string(n));
  }
  if (u.size() != m) throw std::invalid_argument("QpProblem: u has wrong length");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isnan(l(i)) || std::isnan(u(i)) || l(i) > u(i)) {
      throw std::invalid_argument("QpProblem: bounds violate l <= u at row " + std::to_string(i));
    }
  }
  SpMat diff = SpMat(P.transpose()) - P;
  double asym = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SpMat::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
  }
  double pmax = 0.0;
  for (int k = 0; k < P.outerSize(); ++k) {
    for (SpMat::InnerIterator it(P, k); it; ++it) pmax = std::max(pmax, std::abs(it.value()));
  }
  if (asym > 1e-10 * std::max(1.0, pmax)) {
    throw std::invalid_argument("QpProblem: P is not symmetric");
  }
}

QpResiduals kkt_residuals(const QpProblem& p, const VectorXd& z, const VectorXd& y) {
  QpResiduals r;
  const VectorXd Az = p.A * z;
  const VectorXd Pz = p.P * z;
  const VectorXd Aty = p.A.transpose() * y;
  double prim = 0.0;
  for (Eigen::Index i = 0; i < Az.size(); ++i) {
    prim = std::max({prim, p.l(i) - Az(i), Az(i) - p.u(i)});
  }
  r.primal = prim;
  r.dual = inf_norm(Pz + p.q + Aty);
  double support = 0.0;
  const double ytol = 1e-14 * std::max(1.0, inf_norm(y));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) > ytol) {
      support += y(i) * p.u(i);
    } else if (y(i) < -ytol) {
      support += y(i) * p.l(i);
    }
  }
  r.gap = std::abs(z.dot(Pz) + p.q.dot(z) + support);
  return r;
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

QpSolution QpSolver::solve(const QpProblem& problem) { return run(problem, nullptr); }

QpSolution QpSolver::solve(const QpProblem& problem, const QpWarmStart& warm) {
  return run(problem, &warm);
}

void QpSolver::scale(const QpProblem& p) {
  const Eigen::Index n = p.num_variables();
  const Eigen::Index m = p.num_constraints();
  SpMat P = p.P;
  SpMat A = p.A;
  VectorXd q = p.q;
  VectorXd D = VectorXd::Ones(n);
  VectorXd E = VectorXd::Ones(m);
  double c = 1.0;

  for (int it = 0; it < settings_.scaling_iters; ++it) {
    VectorXd dn = col_inf_norms(P).cwiseMax(col_inf_norms(A));
    VectorXd dt(n);
    for (Eigen::Index j = 0; j < n; ++j) dt(j) = clamp_scaling(1.0 / std::sqrt(clamp_scaling(dn(j))));
    VectorXd en = row_inf_norms(A);
    VectorXd et(m);
    for (Eigen::Index i = 0; i < m; ++i) et(i) = clamp_scaling(1.0 / std::sqrt(clamp_scaling(en(i))));

    scale_in_place(P, dt, dt);
    scale_in_place(A, et, dt);
    q = q.cwiseProduct(dt);
    D = D.cwiseProduct(dt);
    E = E.cwiseProduct(et);

    const VectorXd pn = col_inf_norms(P);
    const double mean_p = n > 0 ? pn.mean() : 0.0;
    double ct = std::max(mean_p, inf_norm(q));
    ct = ct < kMinScaling ? 1.0 : 1.0 / ct;
    ct = std::min(ct, kMaxScaling);
    P *= ct;
    q *= ct;
    c *= ct;
  }

  s_.P = P.triangularView<Eigen::Upper>();
  s_.Pfull = P;
  s_.A = A;
  s_.q = q;
  s_.D = D;
  s_.E = E;
  s_.c = c;
  s_.l.resize(m);
  s_.u.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    s_.l(i) = std::isfinite(p.l(i)) ? E(i) * p.l(i) : p.l(i);
    s_.u(i) = std::isfinite(p.u(i)) ? E(i) * p.u(i) : p.u(i);
  }
}

void QpSolver::factor_kkt(double rho) {
  const Eigen::Index n = s_.q.size();
  const Eigen::Index m = s_.l.size();
  rho_vec_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(s_.l(i)) && !std::isfinite(s_.u(i))) {
      rho_vec_(i) = kRhoMin;
    } else if (is_equality(s_.l(i), s_.u(i))) {
      rho_vec_(i) = std::min(kRhoEqFactor * rho, kRhoMax);
    } else {
      rho_vec_(i) = rho;
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(s_.P.nonZeros() + s_.A.nonZeros() + n + m));
  for (int k = 0; k < s_.P.outerSize(); ++k) {
    for (SpMat::InnerIterator it(s_.P, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    trip.emplace_back(static_cast<int>(j), static_cast<int>(j), settings_.sigma);
  }
  for (int k = 0; k < s_.A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(s_.A, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.col()), static_cast<int>(n + it.row()), it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    trip.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -1.0 / rho_vec_(i));
  }
  kkt_.resize(n + m, n + m);
  kkt_.setFromTriplets(trip.begin(), trip.end());
  kkt_.makeCompressed();

  const int* outer = kkt_.outerIndexPtr();
  const int* inner = kkt_.innerIndexPtr();
  const bool same_pattern =
      kkt_analyzed_ && pattern_outer_.size() == static_cast<size_t>(kkt_.outerSize() + 1) &&
      pattern_inner_.size() == static_cast<size_t>(kkt_.nonZeros()) &&
      std::equal(pattern_outer_.begin(), pattern_outer_.end(), outer) &&
      std::equal(pattern_inner_.begin(), pattern_inner_.end(), inner);
  if (!same_pattern) {
    kkt_solver_.analyzePattern(kkt_);
    pattern_outer_.assign(outer, outer + kkt_.outerSize() + 1);
    pattern_inner_.assign(inner, inner + kkt_.nonZeros());
    kkt_analyzed_ = true;
  }
  kkt_solver_.factorize(kkt_);
  if (kkt_solver_.info() != Eigen::Success) {
    throw std::runtime_error("QpSolver: KKT factorization failed");
  }
}

bool QpSolver::polish(const QpProblem& problem, const VectorXd& x_bar, const VectorXd& y_bar,
                      QpSolution* out) {
  const Eigen::Index n = s_.q.size();
  const Eigen::Index m = s_.l.size();
  const VectorXd z_bar = s_.A * x_bar;

  // Active set from the complementarity pattern of (z, y).
  std::vector<int> active;
  std::vector<double> target;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  for (Eigen::Index i = 0; i < m; ++i) {
    if (is_equality(s_.l(i), s_.u(i))) {
      active.push_back(static_cast<int>(i));
      target.push_back(s_.u(i));
      side.push_back(0);
    } else if (z_bar(i) - s_.l(i) < -y_bar(i)) {
      active.push_back(static_cast<int>(i));
      target.push_back(s_.l(i));
      side.push_back(-1);
    } else if (s_.u(i) - z_bar(i) < y_bar(i)) {
      active.push_back(static_cast<int>(i));
      target.push_back(s_.u(i));
      side.push_back(1);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  const double delta = settings_.polish_delta;

  // Reduced rows of A (scaled).
  std::vector<Eigen::Triplet<double>> arow;
  {
    std::vector<int> pos(static_cast<size_t>(m), -1);
    for (Eigen::Index r = 0; r < k; ++r) pos[static_cast<size_t>(active[static_cast<size_t>(r)])] = static_cast<int>(r);
    for (int c = 0; c < s_.A.outerSize(); ++c) {
      for (SpMat::InnerIterator it(s_.A, c); it; ++it) {
        const int r = pos[static_cast<size_t>(it.row())];
        if (r >= 0) arow.emplace_back(r, static_cast<int>(it.col()), it.value());
      }
    }
  }
  SpMat Ared(k, n);
  Ared.setFromTriplets(arow.begin(), arow.end());

  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < s_.P.outerSize(); ++c) {
    for (SpMat::InnerIterator it(s_.P, c); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), delta);
  for (const auto& t : arow) trip.emplace_back(t.col(), static_cast<int>(n) + t.row(), t.value());
  for (Eigen::Index r = 0; r < k; ++r) {
    trip.emplace_back(static_cast<int>(n + r), static_cast<int>(n + r), -delta);
  }
  SpMat K(n + k, n + k);
  K.setFromTriplets(trip.begin(), trip.end());
  Ldlt ldlt;
  ldlt.compute(K);
  if (ldlt.info() != Eigen::Success) return false;

  VectorXd rhs(n + k);
  rhs.head(n) = -s_.q;
  for (Eigen::Index r = 0; r < k; ++r) rhs(n + r) = target[static_cast<size_t>(r)];

  VectorXd sol(n + k);
  sol.head(n) = x_bar;
  for (Eigen::Index r = 0; r < k; ++r) sol(n + r) = y_bar(active[static_cast<size_t>(r)]);

  auto apply_k0 = [&](const VectorXd& v) {
    VectorXd out(n + k);
    out.head(n) = s_.Pfull * v.head(n) + Ared.transpose() * v.tail(k);
    out.tail(k) = Ared * v.head(n);
    return out;
  };
  const double rhs_scale = std::max(1.0, inf_norm(rhs));
  for (int it = 0; it < settings_.polish_refine_iters; ++it) {
    const VectorXd res = rhs - apply_k0(sol);
    if (inf_norm(res) <= 1e-14 * rhs_scale) break;
    sol += ldlt.solve(res);
  }

  VectorXd yb = VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) yb(active[static_cast<size_t>(r)]) = sol(n + r);

  const VectorXd x = s_.D.cwiseProduct(sol.head(n));
  const VectorXd y = s_.E.cwiseProduct(yb) / s_.c;
  if (!x.allFinite() || !y.allFinite()) return false;

  const double y_scale = std::max(1.0, inf_norm(y));
  const double sign_tol = settings_.eps_optimal * y_scale;
  for (Eigen::Index r = 0; r < k; ++r) {
    const double yi = y(active[static_cast<size_t>(r)]);
    const int sd = side[static_cast<size_t>(r)];
    if (sd < 0 && yi > sign_tol) return false;
    if (sd > 0 && yi < -sign_tol) return false;
  }

  const QpResiduals res = kkt_residuals(problem, x, y);
  const VectorXd Ax = problem.A * x;
  const double prim_scale =
      std::max({inf_norm(Ax), finite_inf_norm(problem.l), finite_inf_norm(problem.u)});
  const double dual_scale = std::max(
      {inf_norm(problem.P * x), inf_norm(problem.A.transpose() * y), inf_norm(problem.q)});
  const double eps = settings_.eps_optimal;
  if (res.primal > eps + eps * prim_scale || res.dual > eps + eps * dual_scale) return false;

  out->z = x;
  out->y = y;
  out->residuals = res;
  out->polished = true;
  out->status = QpStatus::kOptimal;
  return true;
}

QpSolution QpSolver::run(const QpProblem& problem, const QpWarmStart* warm) {
  problem.validate();
  scale(problem);
  const Eigen::Index n = s_.q.size();
  const Eigen::Index m = s_.l.size();

  double rho = settings_.rho;
  factor_kkt(rho);

  VectorXd x = VectorXd::Zero(n);
  VectorXd z = VectorXd::Zero(m);
  VectorXd y = VectorXd::Zero(m);
  bool have_warm_duals = false;
  if (warm != nullptr && warm->z.size() == n) {
    x = warm->z.cwiseQuotient(s_.D);
    if (warm->y.size() == m) {
      y = s_.c * warm->y.cwiseQuotient(s_.E);
      have_warm_duals = true;
    }
    z = project_box(s_.A * x, s_.l, s_.u);
  }

  QpSolution out;
  auto finish = [&](QpStatus status, const VectorXd& xs, const VectorXd& ys, int iter) {
    out.z = s_.D.cwiseProduct(xs);
    out.y = s_.E.cwiseProduct(ys) / s_.c;
    out.status = status;
    out.iterations = iter;
    out.residuals = kkt_residuals(problem, out.z, out.y);
    out.objective = 0.5 * out.z.dot(problem.P * out.z) + problem.q.dot(out.z);
    return out;
  };
  auto finish_polished = [&](int iter) {
    out.iterations = iter;
    out.objective = 0.5 * out.z.dot(problem.P * out.z) + problem.q.dot(out.z);
    return out;
  };

  if (have_warm_duals && polish(problem, x, y, &out)) return finish_polished(0);

  double eps = settings_.eps_admm;
  int next_polish = 0;
  int rho_updates = 0;
  VectorXd x_prev = x;
  VectorXd y_prev = y;
  VectorXd rhs(n + m);
  const double alpha = settings_.alpha;
  const double sigma = settings_.sigma;

  for (int iter = 1; iter <= settings_.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    rhs.head(n) = sigma * x - s_.q;
    rhs.tail(m) = z - y.cwiseQuotient(rho_vec_);
    const VectorXd sol = kkt_solver_.solve(rhs);
    const VectorXd z_tilde = z + (sol.tail(m) - y).cwiseQuotient(rho_vec_);
    x = alpha * sol.head(n) + (1.0 - alpha) * x_prev;
    const VectorXd z_relax = alpha * z_tilde + (1.0 - alpha) * z;
    const VectorXd z_new = project_box(z_relax + y.cwiseQuotient(rho_vec_), s_.l, s_.u);
    y = y + rho_vec_.cwiseProduct(z_relax - z_new);
    z = z_new;

    if (iter % settings_.check_interval != 0 && iter != settings_.max_iter) continue;

    // Unscaled residuals.
    const VectorXd xu = s_.D.cwiseProduct(x);
    const VectorXd yu = s_.E.cwiseProduct(y) / s_.c;
    const VectorXd zu = z.cwiseQuotient(s_.E);
    const VectorXd Ax = problem.A * xu;
    const VectorXd Px = problem.P * xu;
    const VectorXd Aty = problem.A.transpose() * yu;
    const double prim = inf_norm(Ax - zu);
    const double dual = inf_norm(Px + problem.q + Aty);
    const double prim_scale = std::max(inf_norm(Ax), inf_norm(zu));
    const double dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(problem.q)});

    if (iter >= next_polish && prim <= eps + eps * prim_scale && dual <= eps + eps * dual_scale) {
      // Only a polished point is reported optimal: an ADMM iterate is feasible only to the
      // tolerance, and a slightly infeasible point can undercut the true minimum.
      if (polish(problem, x, y, &out)) return finish_polished(iter);
      if (eps > settings_.eps_optimal) {
        eps = std::max(eps * 0.1, settings_.eps_optimal);
      } else {
        // The active set is still misidentified; retry after proportionally more iterations.
        next_polish = iter + std::max(settings_.check_interval, iter / 4);
      }
    }

    // Primal infeasibility certificate from the dual increment.
    {
      VectorXd dy = s_.E.cwiseProduct(y - y_prev);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!std::isfinite(problem.u(i))) dy(i) = std::min(dy(i), 0.0);
        if (!std::isfinite(problem.l(i))) dy(i) = std::max(dy(i), 0.0);
      }
      const double dy_norm = inf_norm(dy);
      if (dy_norm > 1e-12) {
        double support = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (dy(i) > 0.0) support += problem.u(i) * dy(i);
          if (dy(i) < 0.0) support += problem.l(i) * dy(i);
        }
        const double tol = settings_.eps_prim_inf * dy_norm;
        if (inf_norm(problem.A.transpose() * dy) <= tol && support < -tol) {
          out.z = xu;
          out.y = dy / dy_norm;
          out.status = QpStatus::kPrimalInfeasible;
          out.iterations = iter;
          return out;
        }
      }
    }
    // Dual infeasibility (unboundedness) certificate from the primal increment.
    {
      const VectorXd dx = s_.D.cwiseProduct(x - x_prev);
      const double dx_norm = inf_norm(dx);
      if (dx_norm > 1e-12) {
        const double tol = settings_.eps_dual_inf * dx_norm;
        bool cert = inf_norm(problem.P * dx) <= tol && problem.q.dot(dx) < -tol;
        if (cert) {
          const VectorXd Adx = problem.A * dx;
          for (Eigen::Index i = 0; i < m && cert; ++i) {
            const bool lo = std::isfinite(problem.l(i));
            const bool up = std::isfinite(problem.u(i));
            if (up && Adx(i) > tol) cert = false;
            if (lo && Adx(i) < -tol) cert = false;
          }
        }
        if (cert) {
          out.z = dx / dx_norm;
          out.y = VectorXd::Zero(m);
          out.status = QpStatus::kDualInfeasible;
          out.iterations = iter;
          return out;
        }
      }
    }

    if (settings_.adaptive_rho && m > 0 && rho_updates < settings_.max_rho_updates &&
        iter % settings_.adaptive_rho_interval == 0) {
      const VectorXd Axs = s_.A * x;
      const VectorXd Pxs = s_.P.selfadjointView<Eigen::Upper>() * x;
      const VectorXd Atys = s_.A.transpose() * y;
      const double pn = inf_norm(Axs - z) / std::max({inf_norm(Axs), inf_norm(z), 1e-10});
      const double dn = inf_norm(Pxs + s_.q + Atys) /
                        std::max({inf_norm(Pxs), inf_norm(Atys), inf_norm(s_.q), 1e-10});
      if (dn > 0.0 && pn > 0.0) {
        const double new_rho = std::clamp(rho * std::sqrt(pn / dn), kRhoMin, kRhoMax);
        if (new_rho > 5.0 * rho || new_rho < 0.2 * rho) {
          rho = new_rho;
          ++rho_updates;
          factor_kkt(rho);
        }
      }
    }
  }
  return finish(QpStatus::kMaxIter, x, y, settings_.max_iter);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve(problem);
}

namespace {

void write_sparse(std::ostream& os, const char* name, const SpMat& M, bool upper_only) {
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      if (upper_only && it.row() > it.col()) continue;
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  os << name << ' ' << t.size() << '\n';
  for (const auto& e : t) os << e.row() << ' ' << e.col() << ' ' << e.value() << '\n';
}

void write_vector(std::ostream& os, const char* name, const VectorXd& v) {
  os << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i))) {
      os << (v(i) > 0 ? "inf" : "-inf");
    } else {
      os << v(i);
    }
    os << (i + 1 == v.size() ? '\n' : ' ');
  }
  if (v.size() == 0) os << '\n';
}

void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want) {
    throw std::runtime_error("read_qp_text: expected '" + want + "', got '" + tok + "'");
  }
}

double read_number(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("read_qp_text: unexpected end of input");
  if (tok == "inf") return kInf;
  if (tok == "-inf") return -kInf;
  return std::stod(tok);
}

VectorXd read_vector(std::istream& is, const std::string& name) {
  expect_token(is, name);
  Eigen::Index len = 0;
  is >> len;
  VectorXd v(len);
  for (Eigen::Index i = 0; i < len; ++i) v(i) = read_number(is);
  return v;
}

}  // namespace

void write_qp_text(std::ostream& os, const QpProblem& p) {
  const auto old_precision = os.precision(17);
  os << "drmpc-qp 1\n";
  os << "dims " << p.num_variables() << ' ' << p.num_constraints() << '\n';
  write_sparse(os, "P", p.P, true);
  write_vector(os, "q", p.q);
  write_sparse(os, "A", p.A, false);
  write_vector(os, "l", p.l);
  write_vector(os, "u", p.u);
  os.precision(old_precision);
}

QpProblem read_qp_text(std::istream& is) {
  expect_token(is, "drmpc-qp");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("read_qp_text: unsupported version");
  expect_token(is, "dims");
  Eigen::Index n = 0, m = 0;
  is >> n >> m;
  QpProblem p;
  auto read_sparse = [&](const std::string& name, Eigen::Index rows, bool mirror) {
    expect_token(is, name);
    size_t nnz = 0;
    is >> nnz;
    std::vector<Eigen::Triplet<double>> t;
    for (size_t k = 0; k < nnz; ++k) {
      int r = 0, c = 0;
      is >> r >> c;
      const double v = read_number(is);
      t.emplace_back(r, c, v);
      if (mirror && r != c) t.emplace_back(c, r, v);
    }
    SpMat M(rows, n);
    M.setFromTriplets(t.begin(), t.end());
    return M;
  };
  p.P = read_sparse("P", n, true);
  p.q = read_vector(is, "q");
  p.A = read_sparse("A", m, false);
  p.l = read_vector(is, "l");
  p.u = read_vector(is, "u");
  if (!is) throw std::runtime_error("read_qp_text: malformed input");
  p.validate();
  return p;
}

}  // namespace drmpc
