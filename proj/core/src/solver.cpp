#include "drmpc/solver.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

namespace drmpc {

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string status_context(const char* what, const QpSolution& sol) {
  std::ostringstream os;
  os << what << " returned " << to_string(sol.status) << " after " << sol.iterations
     << " iterations (primal residual " << sol.residuals.primal << ", dual residual "
     << sol.residuals.dual << ")";
  return os.str();
}

}  // namespace

const char* to_string(Method m) {
  return m == Method::kFrankWolfe ? "fw" : "nt";
}

const char* to_string(StepRule r) {
  return r == StepRule::kAdaptive ? "adaptive" : "fully-adaptive";
}

void SolverSettings::validate() const {
  if (!(zeta > 1.0) || !(tau > 1.0)) throw std::invalid_argument("zeta and tau must exceed 1");
  if (!(gap_tol > 0.0)) throw std::invalid_argument("gap_tol must be positive");
  if (!(inner_tol > 0.0)) throw std::invalid_argument("inner_tol must be positive");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
  if (step == StepRule::kAdaptive && !beta) {
    throw std::invalid_argument("the adaptive step rule requires an explicit beta");
  }
  if (beta && !(*beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

void SolveTrace::write_csv(std::ostream& os) const {
  auto num = [&](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    os.write(buf, res.ptr - buf);
    os << ',';
  };
  os << "iter,f,gap,eta,beta,wall_ns\n";
  for (const auto& r : records) {
    os << r.iter << ',';
    num(r.f);
    num(r.gap);
    num(r.eta);
    num(r.beta);
    os << r.wall_ns << '\n';
  }
}

double step_adaptive(double g, double d_sq, double beta, bool* flagged) {
  if (flagged) *flagged = false;
  if (!(g > 0.0) || !(d_sq > 0.0)) {
    if (flagged && g < 0.0) *flagged = true;
    return 0.0;
  }
  return std::min(1.0, g / (beta * d_sq));
}

FullyAdaptiveStep step_fully_adaptive(const std::function<double(double)>& f_along, double f0,
                                      double g, double d_sq, double beta_prev, double zeta,
                                      double tau, int max_backtracks, double noise,
                                      const std::function<double(double)>& slope_along) {
  FullyAdaptiveStep out;
  out.beta = beta_prev / zeta;
  auto eta_for = [&](double beta) { return std::min(1.0, g / (beta * d_sq)); };
  {
    const double eta = eta_for(out.beta);
    if (eta * g - 0.5 * eta * eta * out.beta * d_sq <= noise) {
      out.beta = beta_prev;
      out.eta = eta_for(beta_prev);
      out.f_new = f0;
      out.unresolved = true;
      if (slope_along) {
        const double curvature = (slope_along(out.eta) + g) / out.eta;
        if (curvature > 0.0) out.eta = std::min(1.0, g / curvature);
      }
      return out;
    }
  }
  for (;;) {
    out.eta = eta_for(out.beta);
    out.f_new = f_along(out.eta);
    if (out.f_new <= f0 - out.eta * g + 0.5 * out.eta * out.eta * out.beta * d_sq + noise) {
      return out;
    }
    if (++out.backtracks > max_backtracks) {
      std::ostringstream os;
      os << "line search exceeded " << max_backtracks << " backtracks (beta " << out.beta
         << ", g " << g << ", |d|^2 " << d_sq << "); the inner tolerance may be too loose";
      throw SolverError(os.str());
    }
    out.beta *= tau;
  }
}

DrmpcSolver::DrmpcSolver(ScenarioSpec spec, SolverSettings settings)
    : spec_(std::move(spec)), settings_(settings), lp_solver_(settings.lp), qp_solver_(settings.qp) {
  settings_.validate();
  spec_.validate_dimensions();
  sp_ = assemble_stacked(spec_, Eigen::VectorXd::Zero(spec_.n()));
  set_ = build_policy_set(spec_, sp_);
  m_by_block_.assign(static_cast<size_t>(spec_.N), {});
  const auto& entries = set_.m_entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    m_by_block_[static_cast<size_t>(entries[i].second / spec_.q())].push_back(
        static_cast<Eigen::Index>(i));
  }
}

QpProblem DrmpcSolver::oracle_qp(const Eigen::VectorXd& x, const BlockCovariance& sigma) const {
  const int q = spec_.q();
  const Eigen::Index nv = set_.num_v();
  const Eigen::Index nz = set_.num_variables();
  const auto& entries = set_.m_entries();

  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index j = 0; j < nv; ++j) {
    for (Eigen::Index i = 0; i < nv; ++i) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), 2.0 * sp_.Huu(i, j));
    }
  }
  for (size_t blk = 0; blk < m_by_block_.size(); ++blk) {
    const Eigen::MatrixXd& S = sigma.blocks[blk];
    for (Eigen::Index a : m_by_block_[blk]) {
      const auto [ra, ca] = entries[static_cast<size_t>(a)];
      for (Eigen::Index b : m_by_block_[blk]) {
        const auto [rb, cb] = entries[static_cast<size_t>(b)];
        trip.emplace_back(static_cast<int>(nv + a), static_cast<int>(nv + b),
                          2.0 * sp_.Huu(ra, rb) * S(ca % q, cb % q));
      }
    }
  }
  QpProblem p;
  p.P.resize(nz, nz);
  p.P.setFromTriplets(trip.begin(), trip.end());

  p.q = Eigen::VectorXd::Zero(nz);
  p.q.head(nv) = 2.0 * sp_.Hux * x;
  Eigen::MatrixXd T(sp_.Huw.rows(), sp_.Huw.cols());
  for (int k = 0; k < spec_.N; ++k) {
    T.middleCols(k * q, q) = sp_.Huw.middleCols(k * q, q) * sigma.blocks[static_cast<size_t>(k)];
  }
  for (size_t i = 0; i < entries.size(); ++i) {
    p.q(nv + static_cast<Eigen::Index>(i)) = 2.0 * T(entries[i].first, entries[i].second);
  }
  const LiftedPolytope poly = set_.at(x);
  p.A = *poly.A;
  p.l = poly.l;
  p.u = poly.u;
  return p;
}

QpSolution DrmpcSolver::run_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
  const LiftedPolytope poly = set_.at(x);
  QpSolution sol = lp_solver_.solve(*poly.A, c, poly.l, poly.u);
  if (sol.status == QpStatus::kPrimalInfeasible) {
    throw OutsideFeasibleSet("state is outside the feasible set: policy set is empty");
  }
  if (!sol.optimal()) throw SolverError(status_context("LP oracle", sol));
  return sol;
}

PolicyParams DrmpcSolver::fw_oracle(const Eigen::VectorXd& x, const PolicyParams& grad,
                                    QpStatus* status) {
  const QpSolution sol = run_lp(x, set_.pack_gradient(grad));
  if (status) *status = sol.status;
  return set_.unpack(sol.z);
}

PolicyParams DrmpcSolver::nt_oracle(const Eigen::VectorXd& x, const BlockCovariance& sigma,
                                    const PolicyParams* warm, QpStatus* status) {
  const QpProblem p = oracle_qp(x, sigma);
  QpWarmStart ws;
  if (warm != nullptr) {
    ws.z = set_.lift(*warm);
  } else if (qp_warm_.z.size() == p.num_variables()) {
    ws.z = qp_warm_.z;
  }
  if (ws.z.size() && qp_warm_.y.size() == p.num_constraints()) ws.y = qp_warm_.y;
  QpSolution sol = ws.z.size() ? qp_solver_.solve(p, ws) : qp_solver_.solve(p);
  if (status) *status = sol.status;
  if (sol.status == QpStatus::kPrimalInfeasible) {
    throw OutsideFeasibleSet("state is outside the feasible set: policy set is empty");
  }
  if (!sol.optimal()) throw SolverError(status_context("QP oracle", sol));
  qp_warm_ = QpWarmStart{sol.z, sol.y};
  return set_.unpack(sol.z);
}

void DrmpcSolver::reset_warm_start() {
  qp_warm_ = {};
  init_warm_ = {};
  lp_solver_.reset();
}

double DrmpcSolver::certificate_gap(const Eigen::VectorXd& x, const PolicyParams& theta) {
  const StackedProblem sp = sp_.with_state(x);
  const PolicyParams grad = worst_case_gradient(sp, theta, spec_.d, settings_.inner_tol);
  const PolicyParams f1 = fw_oracle(x, grad);
  return (theta - f1).dot(grad);
}

PolicyParams DrmpcSolver::initial_point(const Eigen::VectorXd& x) {
  switch (settings_.init) {
    case InitRule::kNominalQp: {
      // The nominal QP at the next state resembles the previous nominal QP more than the last
      // oracle QP, so it keeps its own warm start.
      std::swap(qp_warm_, init_warm_);
      PolicyParams theta;
      try {
        theta = nt_oracle(x, BlockCovariance::repeat(spec_.d.sigma_hat, spec_.N));
      } catch (...) {
        std::swap(qp_warm_, init_warm_);
        throw;
      }
      std::swap(qp_warm_, init_warm_);
      return theta;
    }
    case InitRule::kZero: {
      PolicyParams zero = PolicyParams::zero(spec_.N, spec_.m(), spec_.q());
      if (set_.max_violation(x, zero) <= 1e-9) return zero;
      [[fallthrough]];
    }
    case InitRule::kFeasibleLp:
      return set_.unpack(run_lp(x, Eigen::VectorXd::Zero(set_.num_variables())).z);
  }
  throw std::logic_error("unknown init rule");
}

DrmpcSolution DrmpcSolver::solve(const Eigen::VectorXd& x, const PolicyParams* warm) {
  settings_.validate();
  if (x.size() != spec_.n()) {
    throw std::invalid_argument("state x must have length " + std::to_string(spec_.n()));
  }
  if (!set_.constant_rows_satisfied(x)) {
    throw OutsideFeasibleSet("state is outside the feasible set: a constraint on x(0) fails");
  }
  const StackedProblem sp = sp_.with_state(x);
  const auto& d = spec_.d;
  const double tol = settings_.inner_tol;
  const bool timed = settings_.record_time;
  const std::int64_t t0 = timed ? now_ns() : 0;

  PolicyParams theta = initial_point(x);
  if (warm != nullptr && set_.max_violation(x, *warm) <= 1e-9 &&
      worst_case_objective(sp, *warm, d, tol).f < worst_case_objective(sp, theta, d, tol).f) {
    theta = *warm;
  }

  DrmpcSolution out;
  double beta = settings_.beta.value_or(1.0);
  for (int t = 0;; ++t) {
    WorstCaseResult wc;
    const PolicyParams grad = worst_case_gradient(sp, theta, d, tol, &wc);
    QpStatus lp_status = QpStatus::kOptimal;
    const PolicyParams f1 = fw_oracle(x, grad, &lp_status);
    const double gap = (theta - f1).dot(grad);

    IterationRecord rec;
    rec.iter = t;
    rec.f = wc.f;
    rec.gap = gap;
    rec.beta = beta;
    rec.inner_value = wc.f - (sp.Hx * x + sp.Hu * theta.v).squaredNorm();
    rec.oracle_status = lp_status;
    if (timed) rec.wall_ns = now_ns() - t0;

    out.theta = theta;
    out.f = wc.f;
    out.sigma = wc.sigma;
    out.gap = gap;
    out.iterations = t;
    if (gap <= settings_.gap_tol) {
      out.status = SolveStatus::kConverged;
      out.trace.records.push_back(rec);
      break;
    }
    if (t >= settings_.max_iter) {
      out.status = SolveStatus::kMaxIter;
      out.trace.records.push_back(rec);
      break;
    }

    PolicyParams target;
    if (settings_.method == Method::kNewtonType) {
      QpStatus st = QpStatus::kOptimal;
      target = nt_oracle(x, wc.sigma, &theta, &st);
      rec.oracle_status = st;
    } else {
      target = f1;
    }
    PolicyParams dir = target - theta;
    double d_sq = dir.squared_norm();
    double g = -dir.dot(grad);
    if (settings_.method == Method::kNewtonType && !(g > 0.0 && d_sq > 0.0)) {
      // Near the solution the QP step can lose descent to rounding; the LP vertex never does.
      dir = f1 - theta;
      d_sq = dir.squared_norm();
      g = gap;
      rec.fw_fallback = true;
    }

    if (settings_.step == StepRule::kAdaptive) {
      bool flagged = false;
      rec.eta = step_adaptive(g, d_sq, beta, &flagged);
      rec.flagged = flagged;
    } else {
      if (!(g > 0.0) || !(d_sq > 0.0)) {
        rec.flagged = true;
        rec.eta = 0.0;
      } else {
        auto f_along = [&](double eta) {
          return worst_case_objective(sp, theta + eta * dir, d, tol).f;
        };
        // Rounding in f plus the inner-max tolerance of every block bounds how small a decrease
        // can be told apart from noise.
        const double noise = 1e-13 * (1.0 + std::abs(wc.f)) + spec_.N * tol;
        auto slope_along = [&](double eta) {
          return dir.dot(worst_case_gradient(sp, theta + eta * dir, d, tol));
        };
        const FullyAdaptiveStep st =
            step_fully_adaptive(f_along, wc.f, g, d_sq, beta, settings_.zeta, settings_.tau,
                                settings_.max_backtracks, noise, slope_along);
        rec.eta = st.eta;
        rec.flagged = st.unresolved;
        rec.beta = st.beta;
        rec.backtracks = st.backtracks;
        beta = st.beta;
      }
    }
    out.trace.records.push_back(rec);
    if (rec.eta == 0.0) {
      // No progress is possible along the oracle direction; report the current point.
      out.status = SolveStatus::kMaxIter;
      break;
    }
    theta += rec.eta * dir;
  }
  return out;
}

DrmpcSolution solve_drmpc(const ScenarioSpec& spec, const Eigen::VectorXd& x,
                          const SolverSettings& settings) {
  DrmpcSolver solver(spec, settings);
  return solver.solve(x);
}

}  // namespace drmpc
