#include "drmpc/closedloop.hpp"

#include "drmpc/ambiguity.hpp"
#include "drmpc/linalg.hpp"
#include "drmpc/random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace drmpc {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

DisturbanceModel::DisturbanceModel(const Eigen::MatrixXd& sigma, const Polytope& W)
    : sigma_(sigma) {
  require_psd(sigma, "Sigma_true");
  if (W.dim() != sigma.rows()) {
    throw std::invalid_argument("Sigma_true is " + shape_string(sigma) + " but W has dimension " +
                                std::to_string(W.dim()));
  }
  if (sigma.rows() > 20) throw std::invalid_argument("disturbance dimension above 20");
  root_ = sym_sqrt(sigma, 1e-14);
  const auto q = static_cast<int>(sigma.rows());
  Eigen::VectorXd corner(q);
  for (std::uint32_t mask = 0; mask < (1u << q); ++mask) {
    for (int i = 0; i < q; ++i) corner(i) = (mask >> i) & 1u ? kSqrt3 : -kSqrt3;
    if (!W.contains(root_ * corner, 1e-12)) {
      throw std::invalid_argument(
          "Sigma_true is not realizable by the scaled-uniform sampler: a sample leaves W");
    }
  }
}

Eigen::VectorXd DisturbanceModel::sample(std::uint64_t master, std::uint64_t s,
                                         std::uint64_t k) const {
  Rng rng(counter_seed(master, s, k));
  Eigen::VectorXd omega(sigma_.rows());
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega(i) = rng.uniform(-kSqrt3, kSqrt3);
  return root_ * omega;
}

std::string_view to_string(Controller c) {
  switch (c) {
    case Controller::kDrmpc: return "drmpc";
    case Controller::kSmpc: return "smpc";
    case Controller::kRmpc: return "rmpc";
  }
  return "?";
}

Controller parse_controller(std::string_view name) {
  if (name == "drmpc") return Controller::kDrmpc;
  if (name == "smpc") return Controller::kSmpc;
  if (name == "rmpc") return Controller::kRmpc;
  throw std::invalid_argument("unknown controller '" + std::string(name) +
                              "' (expected drmpc, smpc or rmpc)");
}

ScenarioSpec with_controller(const ScenarioSpec& spec, Controller c) {
  ScenarioSpec out = spec;
  if (c != Controller::kDrmpc) out.d.epsilon = 0.0;
  if (c == Controller::kRmpc) out.d.sigma_hat.setZero();
  return out;
}

ControlStep control_law(DrmpcSolver& solver, const Eigen::VectorXd& x, const PolicyParams* warm) {
  ControlStep out;
  out.solution = solver.solve(x, warm);
  out.u = out.solution.theta.v.head(solver.spec().m());
  return out;
}

PolicyParams shift_policy(const StackedProblem& sp, const PolicyParams& theta,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& w0,
                          const std::optional<Eigen::MatrixXd>& terminal_gain) {
  const int n = sp.n, m = sp.m, q = sp.q, N = sp.N;
  PolicyParams out = PolicyParams::zero(N, m, q);
  for (int i = 0; i + 1 < N; ++i) {
    out.v.segment(i * m, m) =
        theta.v.segment((i + 1) * m, m) + theta.M.block((i + 1) * m, 0, m, q) * w0;
    for (int j = 0; j < i; ++j) {
      out.M.block(i * m, j * q, m, q) = theta.M.block((i + 1) * m, (j + 1) * q, m, q);
    }
  }
  if (terminal_gain) {
    // x(N) of the previous plan is affine in the remaining disturbances w(1..N-1).
    const Eigen::MatrixXd T = sp.bfB.middleRows(N * n, n) * theta.M + sp.bfG.middleRows(N * n, n);
    const Eigen::VectorXd c =
        sp.bfA.middleRows(N * n, n) * x + sp.bfB.middleRows(N * n, n) * theta.v + T.leftCols(q) * w0;
    const Eigen::MatrixXd& K = *terminal_gain;
    out.v.segment((N - 1) * m, m) = K * c;
    for (int j = 0; j + 1 < N; ++j) {
      out.M.block((N - 1) * m, j * q, m, q) = K * T.middleCols((j + 1) * q, q);
    }
  }
  return out;
}

std::vector<double> Realization::running_average() const {
  std::vector<double> out;
  out.reserve(steps.size());
  double sum = 0.0;
  for (size_t k = 0; k < steps.size(); ++k) {
    sum += steps[k].stage_cost;
    out.push_back(sum / static_cast<double>(k + 1));
  }
  return out;
}

std::vector<double> Realization::state_norms_sq() const {
  std::vector<double> out;
  out.reserve(steps.size() + 1);
  for (const auto& st : steps) out.push_back(st.x.squaredNorm());
  if (x_final.size() > 0) out.push_back(x_final.squaredNorm());
  return out;
}

int SimulationResult::failures() const {
  return static_cast<int>(std::count_if(realizations.begin(), realizations.end(),
                                        [](const Realization& r) { return r.failed; }));
}

namespace {

Realization run_realization(DrmpcSolver& solver, const Eigen::VectorXd& x0,
                            const DisturbanceModel& dist, const ClosedLoopSettings& settings,
                            int s) {
  const ScenarioSpec& spec = solver.spec();
  // Realizations must not depend on which ones this worker ran before.
  solver.reset_warm_start();
  Realization r;
  r.s = s;
  r.steps.reserve(static_cast<size_t>(settings.T));
  Eigen::VectorXd x = x0;
  std::optional<PolicyParams> warm;
  const bool timed = settings.solver.record_time;
  for (int k = 0; k < settings.T; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.x = x;
    try {
      const std::int64_t t0 = timed ? now_ns() : 0;
      ControlStep cs = control_law(solver, x, warm ? &*warm : nullptr);
      if (timed) rec.solve_ns = now_ns() - t0;
      rec.u = cs.u;
      rec.gap = cs.solution.gap;
      rec.iterations = cs.solution.iterations;
      rec.converged = cs.solution.converged();
      rec.stage_cost = spec.stage_cost(x, rec.u);
      const Eigen::VectorXd w =
          dist.sample(settings.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k));
      if (settings.warm_start) {
        warm = shift_policy(solver.stacked(), cs.solution.theta, x, w, spec.terminal_gain);
      }
      x = spec.A * x + spec.B * rec.u + spec.G * w;
    } catch (const std::exception& e) {
      r.failed = true;
      r.failed_step = k;
      r.failure = e.what();
      break;
    }
    r.steps.push_back(std::move(rec));
  }
  r.x_final = x;
  return r;
}

}  // namespace

SimulationResult simulate(const ScenarioSpec& spec, const Eigen::VectorXd& x0,
                          const DisturbanceModel& dist, const ClosedLoopSettings& settings,
                          Controller controller) {
  if (settings.T < 0 || settings.S < 1) throw std::invalid_argument("simulate: need T >= 0, S >= 1");
  if (x0.size() != spec.n()) throw std::invalid_argument("simulate: x0 has the wrong length");
  if (dist.dim() != spec.q()) throw std::invalid_argument("simulate: disturbance dimension mismatch");
  const ScenarioSpec variant = with_controller(spec, controller);

  SimulationResult out;
  out.controller = controller;
  out.realizations.resize(static_cast<size_t>(settings.S));
  int jobs = settings.jobs > 0 ? settings.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, settings.S);

  std::atomic<int> next{0};
  auto worker = [&]() {
    DrmpcSolver solver(variant, settings.solver);
    for (int s = next++; s < settings.S; s = next++) {
      out.realizations[static_cast<size_t>(s)] = run_realization(solver, x0, dist, settings, s);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

AggregateStats aggregate(const SimulationResult& result) {
  AggregateStats st;
  std::vector<const Realization*> ok;
  for (const auto& r : result.realizations) {
    if (r.failed) {
      ++st.failures;
    } else {
      ok.push_back(&r);
    }
  }
  if (ok.empty()) throw std::invalid_argument("aggregate: no successful realization");
  const size_t T = ok.front()->steps.size();
  for (const auto* r : ok) {
    if (r->steps.size() != T) throw std::invalid_argument("aggregate: horizons differ");
  }
  st.realizations = static_cast<int>(ok.size());
  const double S = static_cast<double>(ok.size());

  auto moments = [&](const std::vector<std::vector<double>>& series, size_t len,
                     std::vector<double>& mean, std::vector<double>& sd, std::vector<double>* lo,
                     std::vector<double>* hi) {
    mean.assign(len, 0.0);
    sd.assign(len, 0.0);
    if (lo) lo->assign(len, kInf);
    if (hi) hi->assign(len, -kInf);
    for (size_t k = 0; k < len; ++k) {
      double sum = 0.0;
      for (const auto& s : series) sum += s[k];
      const double mu = sum / S;
      double var = 0.0;
      for (const auto& s : series) {
        var += (s[k] - mu) * (s[k] - mu);
        if (lo) (*lo)[k] = std::min((*lo)[k], s[k]);
        if (hi) (*hi)[k] = std::max((*hi)[k], s[k]);
      }
      mean[k] = mu;
      sd[k] = ok.size() > 1 ? std::sqrt(var / (S - 1.0)) : 0.0;
    }
  };

  std::vector<std::vector<double>> norms, costs;
  for (const auto* r : ok) {
    norms.push_back(r->state_norms_sq());
    costs.push_back(r->running_average());
  }
  moments(norms, T + 1, st.mean_sq_norm, st.std_sq_norm, nullptr, nullptr);
  moments(costs, T, st.mean_cost, st.std_cost, &st.min_cost, &st.max_cost);
  return st;
}

std::vector<SweepRow> epsilon_sweep(const ScenarioSpec& spec, const std::vector<double>& grid,
                                    const Eigen::VectorXd& x0, const DisturbanceModel& dist,
                                    const ClosedLoopSettings& settings) {
  for (double eps : grid) {
    AmbiguityParams d = spec.d;
    d.epsilon = eps;
    if (check_membership_D(spec.W, d) == Membership::kReject) {
      throw std::invalid_argument("epsilon_sweep: radius " + std::to_string(eps) +
                                  " fails the ambiguity-set membership check");
    }
  }
  std::vector<SweepRow> rows;
  for (double eps : grid) {
    ScenarioSpec s = spec;
    s.d.epsilon = eps;
    const SimulationResult res = simulate(s, x0, dist, settings, Controller::kDrmpc);
    SweepRow row;
    row.epsilon = eps;
    row.failures = res.failures();
    if (row.failures < settings.S && settings.T > 0) {
      const AggregateStats st = aggregate(res);
      row.mean = st.mean_cost.back();
      row.std = st.std_cost.back();
      row.min = st.min_cost.back();
      row.max = st.max_cost.back();
    } else {
      row.mean = row.std = row.min = row.max = std::nan("");
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Shortest representation that round-trips.
void write_num(std::ostream& os, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Realization& r) {
  const auto n = r.steps.empty() ? r.x_final.size() : r.steps.front().x.size();
  const auto m = r.steps.empty() ? 0 : r.steps.front().u.size();
  os << "k";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i;
  os << ",stage_cost,gap,iterations,solve_ns\n";
  for (const auto& st : r.steps) {
    os << st.k;
    for (Eigen::Index i = 0; i < n; ++i) {
      os << ',';
      write_num(os, st.x(i));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      os << ',';
      write_num(os, st.u(i));
    }
    os << ',';
    write_num(os, st.stage_cost);
    os << ',';
    write_num(os, st.gap);
    os << ',' << st.iterations << ',' << st.solve_ns << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const AggregateStats& stats) {
  os << "k,mean_sq_norm,std_sq_norm,mean_cost,std_cost,min_cost,max_cost\n";
  for (size_t k = 0; k < stats.mean_sq_norm.size(); ++k) {
    os << k << ',';
    write_num(os, stats.mean_sq_norm[k]);
    os << ',';
    write_num(os, stats.std_sq_norm[k]);
    if (k == 0) {
      os << ",,,,\n";
      continue;
    }
    for (const auto* v : {&stats.mean_cost, &stats.std_cost, &stats.min_cost, &stats.max_cost}) {
      os << ',';
      write_num(os, (*v)[k - 1]);
    }
    os << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "epsilon,failures,mean,std,min,max\n";
  for (const auto& r : rows) {
    write_num(os, r.epsilon);
    os << ',' << r.failures;
    for (double v : {r.mean, r.std, r.min, r.max}) {
      os << ',';
      write_num(os, v);
    }
    os << '\n';
  }
}

}  // namespace drmpc
