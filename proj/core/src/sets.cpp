#include "drmpc/sets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace drmpc {

namespace {

using Triplet = Eigen::Triplet<double>;

std::vector<double> row_key(const RobustRow& r) {
  std::vector<double> key;
  key.reserve(static_cast<size_t>(r.f.size() + r.g.size() + r.d.size()));
  key.insert(key.end(), r.f.data(), r.f.data() + r.f.size());
  key.insert(key.end(), r.g.data(), r.g.data() + r.g.size());
  key.insert(key.end(), r.d.data(), r.d.data() + r.d.size());
  return key;
}

}  // namespace

LiftedPolicySet build_policy_set(const ScenarioSpec& spec, const StackedProblem& sp) {
  spec.validate_dimensions();
  LiftedPolicySet set;
  const int n = spec.n(), m = spec.m(), q = spec.q(), N = spec.N;
  set.n = n;
  set.m = m;
  set.q = q;
  set.N = N;
  set.W_ = spec.W;
  if (auto b = spec.W.symmetric_box_bounds()) {
    set.box_ = *b;
  } else if (!is_bounded(spec.W)) {
    throw std::invalid_argument("W must be bounded");
  }

  // Robust rows: Z and U rows at steps 0..N-1, Xf rows at step N. Rows with identical
  // coefficients keep the tightest bound.
  std::map<std::vector<double>, size_t> seen;
  auto add_row = [&](RobustRow r) {
    auto key = row_key(r);
    auto it = seen.find(key);
    if (it != seen.end()) {
      auto& prev = set.rows_[it->second];
      if (r.h < prev.h) prev = std::move(r);
      return;
    }
    seen.emplace(std::move(key), set.rows_.size());
    set.rows_.push_back(std::move(r));
  };
  for (int k = 0; k <= N; ++k) {
    const auto Ak = sp.bfA.middleRows(k * n, n);
    const auto Bk = sp.bfB.middleRows(k * n, n);
    const auto Gk = sp.bfG.middleRows(k * n, n);
    auto emit = [&](const Eigen::MatrixXd& F, const Eigen::MatrixXd& E, const Eigen::VectorXd& h,
                    RobustRow::Source src) {
      for (Eigen::Index i = 0; i < F.rows(); ++i) {
        RobustRow r;
        r.source = src;
        r.step = k;
        r.source_row = static_cast<int>(i);
        r.f = (F.row(i) * Ak).transpose();
        Eigen::RowVectorXd g = F.row(i) * Bk;
        if (E.rows() > 0 && k < N) g.segment(k * m, m) += E.row(i);
        r.g = g.transpose();
        r.d = (F.row(i) * Gk).transpose();
        r.h = h(i);
        add_row(std::move(r));
      }
    };
    if (k < N) {
      emit(spec.Z.H.leftCols(n), spec.Z.H.rightCols(m), spec.Z.h, RobustRow::Source::kZ);
      emit(Eigen::MatrixXd::Zero(spec.U.rows(), n), spec.U.H, spec.U.h, RobustRow::Source::kU);
    } else {
      emit(spec.Xf.H, Eigen::MatrixXd::Zero(0, m), spec.Xf.h, RobustRow::Source::kXf);
    }
  }

  // Causal M entries.
  set.m_index_ = Eigen::MatrixXi::Constant(N * m, N * q, -1);
  for (int r = 0; r < N * m; ++r) {
    const int i = r / m;
    for (int c = 0; c < i * q; ++c) {
      set.m_index_(r, c) = static_cast<int>(set.m_entries_.size());
      set.m_entries_.emplace_back(r, c);
    }
  }
  const Eigen::Index nv = N * m;
  const Eigen::Index nm = static_cast<Eigen::Index>(set.m_entries_.size());

  std::vector<Triplet> trip;
  std::vector<double> lo, up0;
  std::vector<Eigen::RowVectorXd> ux;
  std::vector<Eigen::RowVectorXd> const_f;
  std::vector<double> const_h;

  // Auxiliary rows are appended after all robust rows; collect them separately.
  std::vector<Triplet> aux_trip;
  std::vector<double> aux_lo, aux_up;
  std::map<std::vector<double>, Eigen::Index> aux_lookup;
  Eigen::Index num_aux = 0;

  const bool box = set.box_.size() > 0;
  const Eigen::Index rW = spec.W.rows();

  for (const auto& row : set.rows_) {
    std::vector<std::pair<Eigen::Index, double>> entries;  // lifted index -> coefficient
    for (Eigen::Index r = 0; r < nv; ++r) {
      if (row.g(r) != 0.0) entries.emplace_back(r, row.g(r));
    }
    double constant = 0.0;
    for (int j = 0; j < N; ++j) {
      // Expressions for the q coefficients of disturbance block j.
      std::vector<std::vector<std::pair<int, double>>> exprs(static_cast<size_t>(q));
      Eigen::VectorXd kappa = row.d.segment(j * q, q);
      bool any = false;
      for (int b = 0; b < q; ++b) {
        const int c = j * q + b;
        for (Eigen::Index r = 0; r < nv; ++r) {
          const int idx = set.m_index_(r, c);
          if (idx >= 0 && row.g(r) != 0.0) exprs[static_cast<size_t>(b)].emplace_back(idx, row.g(r));
        }
        any = any || !exprs[static_cast<size_t>(b)].empty();
      }
      if (box) {
        for (int b = 0; b < q; ++b) {
          const auto& e = exprs[static_cast<size_t>(b)];
          const double bound = set.box_(b);
          if (e.empty()) {
            constant += bound * std::abs(kappa(b));
            continue;
          }
          const double s = e.front().second > 0 ? 1.0 : -1.0;
          std::vector<double> key;
          for (const auto& [idx, coef] : e) {
            key.push_back(static_cast<double>(idx));
            key.push_back(s * coef);
          }
          key.push_back(s * kappa(b));
          auto it = aux_lookup.find(key);
          Eigen::Index t;
          if (it == aux_lookup.end()) {
            t = num_aux++;
            aux_lookup.emplace(key, t);
            LiftedPolicySet::AuxGroup grp;
            grp.expr.assign(e.begin(), e.end());
            grp.constant = Eigen::VectorXd::Constant(1, kappa(b));
            grp.offset = t;
            set.aux_groups_.push_back(std::move(grp));
            // t - (e'M + kappa) >= 0 and t + (e'M + kappa) >= 0
            const int r1 = static_cast<int>(aux_lo.size());
            const int r2 = r1 + 1;
            for (const auto& [idx, coef] : e) {
              aux_trip.emplace_back(r1, static_cast<int>(nv + idx), -coef);
              aux_trip.emplace_back(r2, static_cast<int>(nv + idx), coef);
            }
            aux_trip.emplace_back(r1, static_cast<int>(nv + nm + t), 1.0);
            aux_trip.emplace_back(r2, static_cast<int>(nv + nm + t), 1.0);
            aux_lo.push_back(kappa(b));
            aux_up.push_back(kInf);
            aux_lo.push_back(-kappa(b));
            aux_up.push_back(kInf);
          } else {
            t = it->second;
          }
          entries.emplace_back(nv + nm + t, bound);
        }
      } else {
        if (!any) {
          constant += support_function(spec.W, kappa);
          continue;
        }
        std::vector<double> key;
        for (int b = 0; b < q; ++b) {
          for (const auto& [idx, coef] : exprs[static_cast<size_t>(b)]) {
            key.push_back(static_cast<double>(idx));
            key.push_back(coef);
          }
          key.push_back(-1e308);  // component separator
          key.push_back(kappa(b));
        }
        auto it = aux_lookup.find(key);
        Eigen::Index off;
        if (it == aux_lookup.end()) {
          off = num_aux;
          num_aux += rW;
          aux_lookup.emplace(key, off);
          LiftedPolicySet::AuxGroup grp;
          for (int b = 0; b < q; ++b) {
            for (const auto& [idx, coef] : exprs[static_cast<size_t>(b)]) {
              grp.expr.emplace_back(idx * q + b, coef);  // encoded (M index, component)
            }
          }
          grp.constant = kappa;
          grp.offset = off;
          set.aux_groups_.push_back(std::move(grp));
          // H_W' lambda - (E M) = kappa  (q equality rows), lambda >= 0
          for (int b = 0; b < q; ++b) {
            const int rr = static_cast<int>(aux_lo.size());
            for (Eigen::Index s = 0; s < rW; ++s) {
              if (spec.W.H(s, b) != 0.0) {
                aux_trip.emplace_back(rr, static_cast<int>(nv + nm + off + s), spec.W.H(s, b));
              }
            }
            for (const auto& [idx, coef] : exprs[static_cast<size_t>(b)]) {
              aux_trip.emplace_back(rr, static_cast<int>(nv + idx), -coef);
            }
            aux_lo.push_back(kappa(b));
            aux_up.push_back(kappa(b));
          }
          for (Eigen::Index s = 0; s < rW; ++s) {
            const int rr = static_cast<int>(aux_lo.size());
            aux_trip.emplace_back(rr, static_cast<int>(nv + nm + off + s), 1.0);
            aux_lo.push_back(0.0);
            aux_up.push_back(kInf);
          }
        } else {
          off = it->second;
        }
        for (Eigen::Index s = 0; s < rW; ++s) {
          if (spec.W.h(s) != 0.0) entries.emplace_back(nv + nm + off + s, spec.W.h(s));
        }
      }
    }
    if (entries.empty()) {
      const_f.push_back(row.f.transpose());
      const_h.push_back(row.h - constant);
      continue;
    }
    const int rr = static_cast<int>(lo.size());
    // Merge repeated auxiliary references within the row.
    std::map<Eigen::Index, double> merged;
    for (const auto& [idx, coef] : entries) merged[idx] += coef;
    for (const auto& [idx, coef] : merged) trip.emplace_back(rr, static_cast<int>(idx), coef);
    lo.push_back(-kInf);
    up0.push_back(row.h - constant);
    ux.push_back(-row.f.transpose());
  }

  const int robust_count = static_cast<int>(lo.size());
  for (const auto& t : aux_trip) trip.emplace_back(robust_count + t.row(), t.col(), t.value());
  set.num_aux_ = num_aux;
  const Eigen::Index total_rows = robust_count + static_cast<Eigen::Index>(aux_lo.size());
  set.A_.resize(total_rows, nv + nm + num_aux);
  set.A_.setFromTriplets(trip.begin(), trip.end());
  set.A_.makeCompressed();
  set.l_.resize(total_rows);
  set.u0_.resize(total_rows);
  set.Ux_ = Eigen::MatrixXd::Zero(total_rows, n);
  for (int r = 0; r < robust_count; ++r) {
    set.l_(r) = lo[static_cast<size_t>(r)];
    set.u0_(r) = up0[static_cast<size_t>(r)];
    set.Ux_.row(r) = ux[static_cast<size_t>(r)];
  }
  for (size_t r = 0; r < aux_lo.size(); ++r) {
    set.l_(robust_count + static_cast<Eigen::Index>(r)) = aux_lo[r];
    set.u0_(robust_count + static_cast<Eigen::Index>(r)) = aux_up[r];
  }
  set.const_F_.resize(static_cast<Eigen::Index>(const_f.size()), n);
  set.const_h_.resize(static_cast<Eigen::Index>(const_h.size()));
  for (size_t r = 0; r < const_f.size(); ++r) {
    set.const_F_.row(static_cast<Eigen::Index>(r)) = const_f[r];
    set.const_h_(static_cast<Eigen::Index>(r)) = const_h[r];
  }
  return set;
}

LiftedPolytope LiftedPolicySet::at(const Eigen::VectorXd& x) const {
  if (x.size() != n) throw std::invalid_argument("state x must have length " + std::to_string(n));
  LiftedPolytope out;
  out.A = &A_;
  out.l = l_;
  out.u = u0_ + Ux_ * x;
  return out;
}

bool LiftedPolicySet::constant_rows_satisfied(const Eigen::VectorXd& x, double tol) const {
  if (const_h_.size() == 0) return true;
  return ((const_F_ * x) - const_h_).maxCoeff() <= tol;
}

PolicyParams LiftedPolicySet::unpack(const Eigen::VectorXd& z) const {
  PolicyParams theta = PolicyParams::zero(N, m, q);
  theta.v = z.head(num_v());
  for (size_t i = 0; i < m_entries_.size(); ++i) {
    const auto [r, c] = m_entries_[i];
    theta.M(r, c) = z(num_v() + static_cast<Eigen::Index>(i));
  }
  return theta;
}

Eigen::VectorXd LiftedPolicySet::pack(const PolicyParams& theta) const {
  Eigen::VectorXd z(num_v() + num_m());
  z.head(num_v()) = theta.v;
  for (size_t i = 0; i < m_entries_.size(); ++i) {
    const auto [r, c] = m_entries_[i];
    z(num_v() + static_cast<Eigen::Index>(i)) = theta.M(r, c);
  }
  return z;
}

Eigen::VectorXd LiftedPolicySet::pack_gradient(const PolicyParams& grad) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(num_variables());
  z.head(num_v() + num_m()) = pack(grad);
  return z;
}

Eigen::VectorXd LiftedPolicySet::lift(const PolicyParams& theta) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(num_variables());
  const Eigen::VectorXd base = pack(theta);
  z.head(base.size()) = base;
  const Eigen::Index off0 = num_v() + num_m();
  if (box_disturbance()) {
    for (const auto& grp : aux_groups_) {
      double val = grp.constant(0);
      for (const auto& [idx, coef] : grp.expr) val += coef * base(num_v() + idx);
      z(off0 + grp.offset) = std::abs(val);
    }
    return z;
  }
  // General W: smallest-cost dual multipliers per group.
  const Eigen::Index rW = W_.rows();
  for (const auto& grp : aux_groups_) {
    Eigen::VectorXd target = grp.constant;
    for (const auto& [code, coef] : grp.expr) {
      const int idx = code / q;
      const int b = code % q;
      target(b) += coef * base(num_v() + idx);
    }
    QpProblem lp;
    lp.P.resize(rW, rW);
    lp.q = W_.h;
    Eigen::MatrixXd Aeq(q + rW, rW);
    Aeq.topRows(q) = W_.H.transpose();
    Aeq.bottomRows(rW) = Eigen::MatrixXd::Identity(rW, rW);
    lp.A = Aeq.sparseView();
    lp.l.resize(q + rW);
    lp.u.resize(q + rW);
    lp.l << target, Eigen::VectorXd::Zero(rW);
    lp.u << target, Eigen::VectorXd::Constant(rW, kInf);
    const auto sol = LpSolver().solve(lp);
    if (!sol.optimal()) throw std::runtime_error("lift: dual multiplier LP failed");
    z.segment(off0 + grp.offset, rW) = sol.z.cwiseMax(0.0);
  }
  return z;
}

RowWorstCase LiftedPolicySet::row_worst_case(std::size_t i, const Eigen::VectorXd& x,
                                             const PolicyParams& theta) const {
  const RobustRow& r = rows_.at(i);
  const Eigen::VectorXd coef = theta.M.transpose() * r.g + r.d;
  RowWorstCase out;
  out.value = r.f.dot(x) + r.g.dot(theta.v);
  out.w = Eigen::VectorXd::Zero(N * q);
  for (int j = 0; j < N; ++j) {
    const SupportResult s = support(W_, coef.segment(j * q, q));
    out.value += s.value;
    out.w.segment(j * q, q) = s.argmax;
  }
  return out;
}

double LiftedPolicySet::max_violation(const Eigen::VectorXd& x, const PolicyParams& theta) const {
  double worst = -kInf;
  for (size_t i = 0; i < rows_.size(); ++i) {
    worst = std::max(worst, row_worst_case(i, x, theta).value - rows_[i].h);
  }
  return worst;
}

QpSolution solve_lp(const Eigen::VectorXd& c, const LiftedPolicySet& set, const Eigen::VectorXd& x,
                    const LpSettings& settings) {
  const LiftedPolytope poly = set.at(x);
  LpSolver solver(settings);
  return solver.solve(*poly.A, c, poly.l, poly.u);
}

}  // namespace drmpc
