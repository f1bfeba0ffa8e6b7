#include "drmpc/model.hpp"

#include "drmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace drmpc {

namespace {

void require_shape(const Eigen::MatrixXd& M, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
  if (M.rows() != rows || M.cols() != cols) {
    throw std::invalid_argument(std::string(name) + " must be " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + shape_string(M));
  }
}

void require_block_psd(const BlockCovariance& sigma, int q, int N) {
  if (static_cast<int>(sigma.blocks.size()) != N) {
    throw std::invalid_argument("covariance must have " + std::to_string(N) + " blocks");
  }
  for (int k = 0; k < N; ++k) {
    const auto& S = sigma.blocks[static_cast<size_t>(k)];
    require_shape(S, q, q, "covariance block");
    require_psd(S, "covariance block " + std::to_string(k));
  }
}

}  // namespace

void AmbiguityParams::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("ambiguity radius must be finite and >= 0");
  }
  require_psd(sigma_hat, "sigma_hat");
}

BlockCovariance BlockCovariance::repeat(const Eigen::MatrixXd& block, int N) {
  return BlockCovariance{std::vector<Eigen::MatrixXd>(static_cast<size_t>(N), block)};
}

BlockCovariance BlockCovariance::zero(int q, int N) {
  return repeat(Eigen::MatrixXd::Zero(q, q), N);
}

Eigen::MatrixXd BlockCovariance::dense() const {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, total);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    out.block(off, off, b.rows(), b.cols()) = b;
    off += b.rows();
  }
  return out;
}

void ScenarioSpec::validate_dimensions() const {
  const Eigen::Index nn = A.rows();
  if (A.cols() != nn) throw std::invalid_argument("A must be square, got " + shape_string(A));
  if (B.rows() != nn) throw std::invalid_argument("B must have " + std::to_string(nn) + " rows, got " + shape_string(B));
  if (G.rows() != nn) throw std::invalid_argument("G must have " + std::to_string(nn) + " rows, got " + shape_string(G));
  require_shape(Q, nn, nn, "Q");
  require_shape(R, B.cols(), B.cols(), "R");
  require_shape(P, nn, nn, "P");
  if (N < 1) throw std::invalid_argument("horizon N must be >= 1");
  Z.validate("Z", nn + B.cols());
  U.validate("U", B.cols());
  Xf.validate("Xf", nn);
  W.validate("W", G.cols());
  require_shape(d.sigma_hat, G.cols(), G.cols(), "sigma_hat");
  if (terminal_gain) require_shape(*terminal_gain, B.cols(), nn, "terminal_gain");
}

void ScenarioSpec::validate() const {
  validate_dimensions();
  require_psd(Q, "Q");
  require_psd(R, "R");
  require_psd(P, "P");
  d.validate();
  if (!is_bounded(W)) throw std::invalid_argument("W must be bounded");
  if (!contains_origin_interior(W)) {
    throw std::invalid_argument("W must contain the origin in its interior (min h = " +
                                std::to_string(W.h.size() ? W.h.minCoeff() : 0.0) + ")");
  }
  if (!is_bounded(U)) throw std::invalid_argument("U must be bounded");
  if (Z.rows() > 0 && Z.h.minCoeff() < 0.0) throw std::invalid_argument("Z must contain the origin");
  if (Xf.rows() > 0 && Xf.h.minCoeff() < 0.0) throw std::invalid_argument("Xf must contain the origin");
  if (U.rows() > 0 && U.h.minCoeff() < 0.0) throw std::invalid_argument("U must contain the origin");
}

PolicyParams PolicyParams::zero(int N, int m, int q) {
  return PolicyParams{Eigen::MatrixXd::Zero(N * m, N * q), Eigen::VectorXd::Zero(N * m)};
}

PolicyParams& PolicyParams::operator+=(const PolicyParams& o) {
  M += o.M;
  v += o.v;
  return *this;
}

PolicyParams& PolicyParams::operator*=(double s) {
  M *= s;
  v *= s;
  return *this;
}

void apply_causal_mask(Eigen::MatrixXd& M, int N, int m, int q) {
  for (int i = 0; i < N; ++i) {
    M.block(i * m, i * q, m, (N - i) * q).setZero();
  }
}

bool is_causal(const Eigen::MatrixXd& M, int N, int m, int q) {
  if (M.rows() != N * m || M.cols() != N * q) return false;
  for (int i = 0; i < N; ++i) {
    if (M.block(i * m, i * q, m, (N - i) * q).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

StackedProblem assemble_stacked(const ScenarioSpec& spec, const Eigen::VectorXd& x) {
  spec.validate_dimensions();
  const int n = spec.n(), m = spec.m(), q = spec.q(), N = spec.N;
  if (x.size() != n) throw std::invalid_argument("state x must have length " + std::to_string(n));
  StackedProblem sp;
  sp.n = n;
  sp.m = m;
  sp.q = q;
  sp.N = N;
  sp.x = x;

  // x(k) = A^k x0 + sum_{j<k} A^{k-1-j} (B u(j) + G w(j))
  sp.bfA = Eigen::MatrixXd::Zero((N + 1) * n, n);
  sp.bfB = Eigen::MatrixXd::Zero((N + 1) * n, N * m);
  sp.bfG = Eigen::MatrixXd::Zero((N + 1) * n, N * q);
  sp.bfA.topRows(n).setIdentity();
  for (int k = 1; k <= N; ++k) {
    sp.bfA.middleRows(k * n, n) = spec.A * sp.bfA.middleRows((k - 1) * n, n);
    sp.bfB.middleRows(k * n, n) = spec.A * sp.bfB.middleRows((k - 1) * n, n);
    sp.bfG.middleRows(k * n, n) = spec.A * sp.bfG.middleRows((k - 1) * n, n);
    sp.bfB.block(k * n, (k - 1) * m, n, m) = spec.B;
    sp.bfG.block(k * n, (k - 1) * q, n, q) = spec.G;
  }

  const double clip = 1e-10;
  const Eigen::MatrixXd Qh = sym_sqrt(spec.Q, clip * std::max(1.0, max_eigenvalue(spec.Q)));
  const Eigen::MatrixXd Ph = sym_sqrt(spec.P, clip * std::max(1.0, max_eigenvalue(spec.P)));
  const Eigen::MatrixXd Rh = sym_sqrt(spec.R, clip * std::max(1.0, max_eigenvalue(spec.R)));
  Eigen::MatrixXd Qbar = Eigen::MatrixXd::Zero((N + 1) * n, (N + 1) * n);
  for (int k = 0; k < N; ++k) Qbar.block(k * n, k * n, n, n) = Qh;
  Qbar.block(N * n, N * n, n, n) = Ph;
  const Eigen::MatrixXd Rbar = block_diag_repeat(Rh, N);

  const int rows = (N + 1) * n + N * m;
  sp.Hx = Eigen::MatrixXd::Zero(rows, n);
  sp.Hu = Eigen::MatrixXd::Zero(rows, N * m);
  sp.Hw = Eigen::MatrixXd::Zero(rows, N * q);
  sp.Hx.topRows((N + 1) * n) = Qbar * sp.bfA;
  sp.Hu.topRows((N + 1) * n) = Qbar * sp.bfB;
  sp.Hu.bottomRows(N * m) = Rbar;
  sp.Hw.topRows((N + 1) * n) = Qbar * sp.bfG;

  sp.Huu = sp.Hu.transpose() * sp.Hu;
  sp.Hux = sp.Hu.transpose() * sp.Hx;
  sp.Huw = sp.Hu.transpose() * sp.Hw;
  sp.Hww = sp.Hw.transpose() * sp.Hw;
  sp.Hxx = sp.Hx.transpose() * sp.Hx;
  return sp;
}

StackedProblem StackedProblem::with_state(const Eigen::VectorXd& x0) const {
  if (x0.size() != n) throw std::invalid_argument("state x must have length " + std::to_string(n));
  StackedProblem out = *this;
  out.x = x0;
  return out;
}

double StackedProblem::trajectory_cost(const PolicyParams& theta, const Eigen::VectorXd& w) const {
  const Eigen::VectorXd r = Hx * x + Hu * (theta.M * w + theta.v) + Hw * w;
  return r.squaredNorm();
}

Eigen::MatrixXd StackedProblem::z_block(const Eigen::MatrixXd& M, int k) const {
  const Eigen::MatrixXd Mk = M.middleCols(k * q, q);
  const Eigen::MatrixXd HuwMk = Huw.middleCols(k * q, q);
  const Eigen::MatrixXd cross = Mk.transpose() * HuwMk;
  Eigen::MatrixXd Zk = Mk.transpose() * Huu * Mk + cross + cross.transpose() +
                       Hww.block(k * q, k * q, q, q);
  return 0.5 * (Zk + Zk.transpose());
}

double expected_cost(const StackedProblem& sp, const PolicyParams& theta,
                     const BlockCovariance& sigma) {
  require_block_psd(sigma, sp.q, sp.N);
  const Eigen::VectorXd nominal = sp.Hx * sp.x + sp.Hu * theta.v;
  double value = nominal.squaredNorm();
  for (int k = 0; k < sp.N; ++k) {
    value += (sp.z_block(theta.M, k).cwiseProduct(sigma.blocks[static_cast<size_t>(k)])).sum();
  }
  return value;
}

PolicyParams cost_gradient(const StackedProblem& sp, const PolicyParams& theta,
                           const BlockCovariance& sigma) {
  require_block_psd(sigma, sp.q, sp.N);
  PolicyParams g;
  g.v = 2.0 * (sp.Hux * sp.x + sp.Huu * theta.v);
  g.M = Eigen::MatrixXd::Zero(theta.M.rows(), theta.M.cols());
  const Eigen::MatrixXd T = sp.Huu * theta.M + sp.Huw;
  for (int k = 0; k < sp.N; ++k) {
    g.M.middleCols(k * sp.q, sp.q) =
        2.0 * T.middleCols(k * sp.q, sp.q) * sigma.blocks[static_cast<size_t>(k)];
  }
  apply_causal_mask(g.M, sp.N, sp.m, sp.q);
  return g;
}

}  // namespace drmpc
