#include "drmpc/polytope.hpp"

#include "drmpc/lp.hpp"
#include "drmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmpc {

Polytope Polytope::whole_space(Eigen::Index dim) {
  return Polytope(Eigen::MatrixXd::Zero(0, dim), Eigen::VectorXd::Zero(0));
}

Polytope Polytope::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() != upper.size()) throw std::invalid_argument("box: bound length mismatch");
  const Eigen::Index d = lower.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * d, d);
  Eigen::VectorXd h(2 * d);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::isfinite(upper(i))) {
      H(r, i) = 1.0;
      h(r++) = upper(i);
    }
    if (std::isfinite(lower(i))) {
      H(r, i) = -1.0;
      h(r++) = -lower(i);
    }
  }
  return Polytope(H.topRows(r), h.head(r));
}

Polytope Polytope::symmetric_box(Eigen::Index dim, double bound) {
  return box(Eigen::VectorXd::Constant(dim, -bound), Eigen::VectorXd::Constant(dim, bound));
}

bool Polytope::contains(const Eigen::VectorXd& z, double tol) const {
  if (rows() == 0) return true;
  return ((H * z) - h).maxCoeff() <= tol;
}

std::optional<Eigen::VectorXd> Polytope::symmetric_box_bounds() const {
  const Eigen::Index d = dim();
  if (rows() != 2 * d || d == 0) return std::nullopt;
  Eigen::VectorXd up = Eigen::VectorXd::Constant(d, -1.0);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, -1.0);
  for (Eigen::Index r = 0; r < rows(); ++r) {
    Eigen::Index idx = -1;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (H(r, j) == 0.0) continue;
      if (idx >= 0) return std::nullopt;
      idx = j;
    }
    if (idx < 0) return std::nullopt;
    const double a = H(r, idx);
    const double b = h(r) / std::abs(a);
    if (!(b > 0.0)) return std::nullopt;
    double& slot = a > 0 ? up(idx) : lo(idx);
    if (slot >= 0.0) return std::nullopt;
    slot = b;
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (up(j) < 0.0 || lo(j) < 0.0) return std::nullopt;
    if (std::abs(up(j) - lo(j)) > 1e-14 * std::max(1.0, up(j))) return std::nullopt;
  }
  return up;
}

void Polytope::validate(std::string_view what, Eigen::Index expected_dim) const {
  if (H.rows() != h.size()) {
    throw std::invalid_argument(std::string(what) + ": H has " + std::to_string(H.rows()) +
                                " rows but h has " + std::to_string(h.size()) + " entries");
  }
  if (expected_dim >= 0 && H.cols() != expected_dim) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(expected_dim) + ", got " +
                                std::to_string(H.cols()));
  }
  for (Eigen::Index r = 0; r < H.rows(); ++r) {
    if (H.row(r).cwiseAbs().maxCoeff() == 0.0) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(r) +
                                  " of H is zero");
    }
    if (!std::isfinite(h(r)) || !H.row(r).allFinite()) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(r) +
                                  " is not finite");
    }
  }
}

SupportResult support(const Polytope& P, const Eigen::VectorXd& a) {
  if (a.size() != P.dim()) throw std::invalid_argument("support: direction has wrong length");
  SupportResult out;
  if (a.cwiseAbs().maxCoeff() == 0.0 || a.size() == 0) {
    out.argmax = Eigen::VectorXd::Zero(a.size());
    if (!P.contains(out.argmax)) {
      // Zero direction over a set not containing the origin still needs a member.
      QpProblem lp;
      lp.P.resize(a.size(), a.size());
      lp.q = Eigen::VectorXd::Zero(a.size());
      lp.A = P.H.sparseView();
      lp.l = Eigen::VectorXd::Constant(P.rows(), -kInf);
      lp.u = P.h;
      const auto sol = LpSolver().solve(lp);
      if (sol.status == QpStatus::kPrimalInfeasible) throw std::runtime_error("support: empty set");
      out.argmax = sol.z;
    }
    return out;
  }
  if (auto b = P.symmetric_box_bounds()) {
    out.argmax = Eigen::VectorXd(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      out.argmax(i) = a(i) > 0 ? (*b)(i) : (a(i) < 0 ? -(*b)(i) : 0.0);
    }
    out.value = b->dot(a.cwiseAbs());
    return out;
  }
  if (P.rows() == 0) throw std::domain_error("support: unbounded direction");
  QpProblem lp;
  lp.P.resize(a.size(), a.size());
  lp.q = -a;
  lp.A = P.H.sparseView();
  lp.l = Eigen::VectorXd::Constant(P.rows(), -kInf);
  lp.u = P.h;
  const auto sol = LpSolver().solve(lp);
  switch (sol.status) {
    case QpStatus::kOptimal: break;
    case QpStatus::kDualInfeasible: throw std::domain_error("support: unbounded direction");
    case QpStatus::kPrimalInfeasible: throw std::runtime_error("support: empty set");
    case QpStatus::kMaxIter: throw std::runtime_error("support: LP did not converge");
  }
  out.argmax = sol.z;
  out.value = a.dot(sol.z);
  return out;
}

double support_function(const Polytope& P, const Eigen::VectorXd& a) { return support(P, a).value; }

bool is_bounded(const Polytope& P) {
  if (P.dim() == 0) return true;
  if (P.symmetric_box_bounds()) return true;
  for (Eigen::Index i = 0; i < P.dim(); ++i) {
    for (double s : {1.0, -1.0}) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(P.dim());
      e(i) = s;
      try {
        support(P, e);
      } catch (const std::domain_error&) {
        return false;
      }
    }
  }
  return true;
}

bool contains_origin_interior(const Polytope& P, double margin) {
  return P.rows() == 0 || P.h.minCoeff() >= margin;
}

Polytope remove_redundant_rows(const Polytope& P, double tol) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    bool dup = false;
    for (Eigen::Index k : keep) {
      if ((P.H.row(k) - P.H.row(r)).cwiseAbs().maxCoeff() == 0.0 && P.h(k) <= P.h(r)) dup = true;
    }
    if (!dup) keep.push_back(r);
  }
  // Sequential elimination: a row is dropped when maximizing it over the remaining rows
  // (with itself relaxed by one unit to keep the LP bounded) cannot exceed its bound.
  std::vector<bool> active(keep.size(), true);
  for (size_t i = 0; i < keep.size(); ++i) {
    const Eigen::Index r = keep[i];
    Eigen::MatrixXd H(0, P.dim());
    Eigen::VectorXd h(0);
    for (size_t j = 0; j < keep.size(); ++j) {
      if (!active[j]) continue;
      H.conservativeResize(H.rows() + 1, Eigen::NoChange);
      h.conservativeResize(h.size() + 1);
      H.row(H.rows() - 1) = P.H.row(keep[j]);
      h(h.size() - 1) = P.h(keep[j]) + (j == i ? 1.0 : 0.0);
    }
    try {
      if (support(Polytope(H, h), P.H.row(r).transpose()).value <= P.h(r) + tol) active[i] = false;
    } catch (const std::exception&) {
      // Unbounded or failed probes keep the row.
    }
  }
  std::vector<Eigen::Index> out;
  for (size_t j = 0; j < keep.size(); ++j) {
    if (active[j]) out.push_back(keep[j]);
  }
  Polytope res(Eigen::MatrixXd(static_cast<Eigen::Index>(out.size()), P.dim()),
               Eigen::VectorXd(static_cast<Eigen::Index>(out.size())));
  for (size_t j = 0; j < out.size(); ++j) {
    res.H.row(static_cast<Eigen::Index>(j)) = P.H.row(out[j]);
    res.h(static_cast<Eigen::Index>(j)) = P.h(out[j]);
  }
  return res;
}

Polytope cartesian_product(const Polytope& a, const Polytope& b) {
  Polytope out(Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.dim() + b.dim()),
               Eigen::VectorXd(a.rows() + b.rows()));
  out.H.topLeftCorner(a.rows(), a.dim()) = a.H;
  out.H.bottomRightCorner(b.rows(), b.dim()) = b.H;
  out.h << a.h, b.h;
  return out;
}

}  // namespace drmpc
