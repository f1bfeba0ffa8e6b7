#include "drmpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drmpc {

LpSolver::LpSolver(LpSettings settings) : settings_(settings) {}

void LpSolver::reset() {
  have_basis_ = false;
  since_refactor_ = 0;
}

Eigen::VectorXd LpSolver::column(int j) const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
  if (j < nz_) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(*A_, j); it; ++it) a(it.row()) = it.value();
  } else {
    a(j - nz_) = -1.0;
  }
  return a;
}

void LpSolver::place_nonbasic(int j) {
  const bool lo = std::isfinite(lb_(j));
  const bool hi = std::isfinite(ub_(j));
  Status s = status_[j];
  if (lo && hi && lb_(j) == ub_(j)) {
    s = Status::kFixed;
  } else if (s == Status::kUpper && !hi) {
    s = lo ? Status::kLower : Status::kFree;
  } else if ((s == Status::kLower || s == Status::kFixed) && !lo) {
    s = hi ? Status::kUpper : Status::kFree;
  } else if (s == Status::kFixed) {
    s = Status::kLower;
  } else if (s == Status::kFree && (lo || hi)) {
    s = lo ? Status::kLower : Status::kUpper;
  }
  status_[j] = s;
  switch (s) {
    case Status::kLower:
    case Status::kFixed:
      x_(j) = lb_(j);
      break;
    case Status::kUpper:
      x_(j) = ub_(j);
      break;
    case Status::kFree:
      if (!std::isfinite(x_(j))) x_(j) = 0.0;
      break;
    case Status::kBasic:
      break;
  }
}

void LpSolver::cold_start() {
  const Eigen::Index total = nz_ + m_;
  status_.assign(static_cast<size_t>(total), Status::kFree);
  x_ = Eigen::VectorXd::Zero(total);
  head_.resize(static_cast<size_t>(m_));
  for (Eigen::Index i = 0; i < m_; ++i) {
    head_[static_cast<size_t>(i)] = static_cast<int>(nz_ + i);
    status_[static_cast<size_t>(nz_ + i)] = Status::kBasic;
  }
  for (Eigen::Index j = 0; j < nz_; ++j) place_nonbasic(static_cast<int>(j));
  binv_ = -Eigen::MatrixXd::Identity(m_, m_);
  since_refactor_ = 0;
  recompute_basic_values();
}

bool LpSolver::refactor() {
  since_refactor_ = 0;
  if (m_ == 0) return true;
  Eigen::MatrixXd B(m_, m_);
  for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = column(head_[static_cast<size_t>(i)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  if (!(lu.rcond() > 1e-13)) return false;
  binv_ = lu.inverse();
  return true;
}

bool LpSolver::same_matrix(const Eigen::SparseMatrix<double>& A) const {
  if (A.rows() != A_copy_.rows() || A.cols() != A_copy_.cols() ||
      A.nonZeros() != A_copy_.nonZeros() || !A.isCompressed() || !A_copy_.isCompressed()) {
    return false;
  }
  const auto nnz = static_cast<size_t>(A.nonZeros());
  const auto outer = static_cast<size_t>(A.outerSize() + 1);
  return std::equal(A.outerIndexPtr(), A.outerIndexPtr() + outer, A_copy_.outerIndexPtr()) &&
         std::equal(A.innerIndexPtr(), A.innerIndexPtr() + nnz, A_copy_.innerIndexPtr()) &&
         std::equal(A.valuePtr(), A.valuePtr() + nnz, A_copy_.valuePtr());
}

void LpSolver::recompute_basic_values() {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (Eigen::Index j = 0; j < nz_ + m_; ++j) {
    if (status_[static_cast<size_t>(j)] == Status::kBasic || x_(j) == 0.0) continue;
    if (j < nz_) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(*A_, j); it; ++it) {
        rhs(it.row()) -= it.value() * x_(j);
      }
    } else {
      rhs(j - nz_) += x_(j);
    }
  }
  const Eigen::VectorXd xb = binv_ * rhs;
  for (Eigen::Index i = 0; i < m_; ++i) x_(head_[static_cast<size_t>(i)]) = xb(i);
}

QpSolution LpSolver::solve(const QpProblem& problem) {
  problem.validate();
  for (int k = 0; k < problem.P.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(problem.P, k); it; ++it) {
      if (it.value() != 0.0) throw std::invalid_argument("LpSolver: P must be zero");
    }
  }
  return solve(problem.A, problem.q, problem.l, problem.u);
}

QpSolution LpSolver::solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& c,
                           const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  if (A.cols() != c.size() || A.rows() != l.size() || l.size() != u.size()) {
    throw std::invalid_argument("LpSolver: inconsistent dimensions");
  }
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (!(l(i) <= u(i))) throw std::invalid_argument("LpSolver: l > u in row " + std::to_string(i));
  }
  const bool same_shape = have_basis_ && A.rows() == m_ && A.cols() == nz_;
  const bool reuse_inverse = same_shape && same_matrix(A);
  if (!reuse_inverse) {
    A_copy_ = A;
    A_copy_.makeCompressed();
  }
  A_ = &A;
  nz_ = A.cols();
  m_ = A.rows();
  const Eigen::Index total = nz_ + m_;
  lb_.resize(total);
  ub_.resize(total);
  lb_.head(nz_).setConstant(-kInf);
  ub_.head(nz_).setConstant(kInf);
  lb_.tail(m_) = l;
  ub_.tail(m_) = u;

  bool warm = false;
  if (reuse_inverse && since_refactor_ < settings_.refactor_interval) {
    warm = true;
  } else if (same_shape) {
    warm = refactor();
  }
  if (warm) {
    for (Eigen::Index j = 0; j < total; ++j) {
      if (status_[static_cast<size_t>(j)] != Status::kBasic) place_nonbasic(static_cast<int>(j));
    }
    recompute_basic_values();
  } else {
    cold_start();
  }
  have_basis_ = true;

  const double ftol = settings_.feas_tol;
  const double otol = settings_.opt_tol;
  QpSolution out;
  out.status = QpStatus::kMaxIter;

  Eigen::VectorXd cost(total);
  Eigen::VectorXd cb(m_);
  Eigen::VectorXd pi(m_);
  int degenerate_run = 0;
  int pivots = 0;
  bool phase_one = false;

  auto infeasibility = [&](Eigen::Index j) {
    if (x_(j) < lb_(j) - ftol) return -1;
    if (x_(j) > ub_(j) + ftol) return 1;
    return 0;
  };

  // Residuals are measured against A directly, so they expose drift in the updated inverse.
  auto accurate = [&]() {
    recompute_basic_values();
    const Eigen::VectorXd z = x_.head(nz_);
    const Eigen::VectorXd Az = A * z;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double tol = 10.0 * ftol * (1.0 + std::max(std::abs(Az(i)), 1.0));
      if (Az(i) < l(i) - tol || Az(i) > u(i) + tol) return false;
    }
    Eigen::VectorXd cbf(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int k = head_[static_cast<size_t>(i)];
      cbf(i) = k < nz_ ? c(k) : 0.0;
    }
    const Eigen::VectorXd y = binv_.transpose() * cbf;
    const double cscale = 1.0 + (c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    for (Eigen::Index j = 0; j < nz_; ++j) {
      if (status_[static_cast<size_t>(j)] != Status::kBasic) continue;
      double d = c(j);
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) d -= y(it.row()) * it.value();
      if (std::abs(d) > 10.0 * otol * cscale) return false;
    }
    return true;
  };

  int budget = settings_.max_iter;
  for (bool retried = false;;) {
    for (; budget > 0; --budget) {
      phase_one = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const int k = head_[static_cast<size_t>(i)];
        const int inf = infeasibility(k);
        cb(i) = inf;
        if (inf != 0) phase_one = true;
      }
      if (!phase_one) {
        cost.head(nz_) = c;
        cost.tail(m_).setZero();
        for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(head_[static_cast<size_t>(i)]);
      } else {
        cost.setZero();
      }
      pi.noalias() = binv_.transpose() * cb;

      // Pricing. Dantzig normally, smallest index while stalling.
      const bool bland = degenerate_run >= settings_.degenerate_limit;
      int q = -1;
      double dir = 0.0;
      double best = 0.0;
      for (Eigen::Index j = 0; j < total; ++j) {
        const Status s = status_[static_cast<size_t>(j)];
        if (s == Status::kBasic || s == Status::kFixed) continue;
        double d = cost(j);
        if (j < nz_) {
          for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) {
            d -= pi(it.row()) * it.value();
          }
        } else {
          d += pi(j - nz_);
        }
        double move = 0.0;
        if ((s == Status::kLower || s == Status::kFree) && d < -otol) move = 1.0;
        if ((s == Status::kUpper || s == Status::kFree) && d > otol) move = -1.0;
        if (move == 0.0) continue;
        if (bland) {
          q = static_cast<int>(j);
          dir = move;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = static_cast<int>(j);
          dir = move;
        }
      }

      if (q < 0) {
        out.status = phase_one ? QpStatus::kPrimalInfeasible : QpStatus::kOptimal;
        break;
      }

      const Eigen::VectorXd alpha = binv_ * column(q);

      // Harris two-pass ratio test.
      double own = kInf;
      if (std::isfinite(lb_(q)) && std::isfinite(ub_(q))) own = ub_(q) - lb_(q);
      double relaxed = own;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (std::abs(alpha(i)) < settings_.pivot_tol) continue;
        const int k = head_[static_cast<size_t>(i)];
        const double rate = -dir * alpha(i);
        const int inf = phase_one ? infeasibility(k) : 0;
        double limit = kInf;
        if (inf < 0) {
          if (rate > 0.0) limit = (lb_(k) - x_(k) + ftol) / rate;
        } else if (inf > 0) {
          if (rate < 0.0) limit = (x_(k) - ub_(k) + ftol) / -rate;
        } else if (rate < 0.0) {
          if (std::isfinite(lb_(k))) limit = (x_(k) - lb_(k) + ftol) / -rate;
        } else if (std::isfinite(ub_(k))) {
          limit = (ub_(k) - x_(k) + ftol) / rate;
        }
        relaxed = std::min(relaxed, limit);
      }

      if (!std::isfinite(relaxed)) {
        if (phase_one) throw std::logic_error("LpSolver: unbounded phase-one ray");
        out.status = QpStatus::kDualInfeasible;
        break;
      }

      int r = -1;
      double step = own;
      bool leave_upper = false;
      double best_pivot = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (std::abs(alpha(i)) < settings_.pivot_tol) continue;
        const int k = head_[static_cast<size_t>(i)];
        const double rate = -dir * alpha(i);
        const int inf = phase_one ? infeasibility(k) : 0;
        double ratio = kInf;
        bool upper = false;
        if (inf < 0) {
          if (rate > 0.0) ratio = (lb_(k) - x_(k)) / rate;
        } else if (inf > 0) {
          if (rate < 0.0) {
            ratio = (x_(k) - ub_(k)) / -rate;
            upper = true;
          }
        } else if (rate < 0.0) {
          if (std::isfinite(lb_(k))) ratio = (x_(k) - lb_(k)) / -rate;
        } else if (std::isfinite(ub_(k))) {
          ratio = (ub_(k) - x_(k)) / rate;
          upper = true;
        }
        if (ratio <= relaxed && std::abs(alpha(i)) > best_pivot) {
          best_pivot = std::abs(alpha(i));
          r = static_cast<int>(i);
          step = std::max(ratio, 0.0);
          leave_upper = upper;
        }
      }
      if (own <= relaxed && (r < 0 || own <= step)) r = -1, step = own;

      ++pivots;
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;

      x_(q) += dir * step;
      for (Eigen::Index i = 0; i < m_; ++i) x_(head_[static_cast<size_t>(i)]) -= dir * step * alpha(i);

      if (r < 0) {
        // Bound flip of the entering variable.
        status_[static_cast<size_t>(q)] = dir > 0 ? Status::kUpper : Status::kLower;
        x_(q) = dir > 0 ? ub_(q) : lb_(q);
        continue;
      }

      const int leaving = head_[static_cast<size_t>(r)];
      status_[static_cast<size_t>(leaving)] = leave_upper ? Status::kUpper : Status::kLower;
      if (lb_(leaving) == ub_(leaving)) status_[static_cast<size_t>(leaving)] = Status::kFixed;
      x_(leaving) = leave_upper ? ub_(leaving) : lb_(leaving);
      status_[static_cast<size_t>(q)] = Status::kBasic;
      head_[static_cast<size_t>(r)] = q;

      const double piv = alpha(r);
      binv_.row(r) /= piv;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (i == r || alpha(i) == 0.0) continue;
        binv_.row(i) -= alpha(i) * binv_.row(r);
      }

      if (++since_refactor_ >= settings_.refactor_interval) {
        if (!refactor()) throw std::runtime_error("LpSolver: basis became singular");
        recompute_basic_values();
      }
    }

    if (out.status == QpStatus::kOptimal && !retried && since_refactor_ > 0 && !accurate()) {
      retried = true;
      out.status = QpStatus::kMaxIter;
      if (!refactor()) throw std::runtime_error("LpSolver: basis became singular");
      recompute_basic_values();
      continue;
    }
    break;
  }

  last_pivots_ = pivots;
  out.iterations = pivots;
  recompute_basic_values();
  out.z = x_.head(nz_);
  out.y = -pi;
  if (out.status == QpStatus::kOptimal) {
    // A final refactor may expose tiny infeasibilities; report them through the residuals.
    Eigen::VectorXd cbf(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int k = head_[static_cast<size_t>(i)];
      cbf(i) = k < nz_ ? c(k) : 0.0;
    }
    out.y = -(binv_.transpose() * cbf);
    const Eigen::VectorXd Az = A * out.z;
    double prim = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      prim = std::max({prim, l(i) - Az(i), Az(i) - u(i)});
    }
    out.residuals.primal = prim;
    out.residuals.dual = (c + A.transpose() * out.y).cwiseAbs().maxCoeff();
    out.objective = c.dot(out.z);
    double dual_obj = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (out.y(i) < 0.0 && std::isfinite(l(i))) dual_obj += out.y(i) * l(i);
      if (out.y(i) > 0.0 && std::isfinite(u(i))) dual_obj += out.y(i) * u(i);
    }
    out.residuals.gap = std::abs(out.objective + dual_obj);
    out.polished = true;
  } else {
    out.objective = out.status == QpStatus::kDualInfeasible ? -kInf : kInf;
    have_basis_ = false;
  }
  return out;
}

}  // namespace drmpc
