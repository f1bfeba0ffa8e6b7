#include "drmpc/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace drmpc {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& S, double clip) {
  if (S.size() == 0) return S;
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev(i) = ev(i) <= clip ? 0.0 : std::sqrt(ev(i));
  }
  Eigen::MatrixXd root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (root + root.transpose());
}

bool is_symmetric(const Eigen::MatrixXd& M, double tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

void require_square_symmetric(const Eigen::MatrixXd& M, std::string_view what) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument(std::string(what) + " must be square, got " + shape_string(M));
  }
  if (!is_symmetric(M)) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
}

}  // namespace

void require_psd(const Eigen::MatrixXd& M, std::string_view what) {
  require_square_symmetric(M, what);
  if (M.size() == 0) return;
  const double lo = min_eigenvalue(M);
  const double hi = max_eigenvalue(M);
  if (lo < -kTolPsd * std::max(1.0, hi)) {
    std::ostringstream os;
    os << what << " is not positive semidefinite (min eigenvalue " << lo << ")";
    throw std::invalid_argument(os.str());
  }
}

void require_pd(const Eigen::MatrixXd& M, std::string_view what) {
  require_square_symmetric(M, what);
  if (M.size() == 0) return;
  const double lo = min_eigenvalue(M);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << what << " is not positive definite (min eigenvalue " << lo << ")";
    throw std::invalid_argument(os.str());
  }
}

Eigen::MatrixXd block_diag_repeat(const Eigen::MatrixXd& block, int count) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block.rows() * count, block.cols() * count);
  for (int i = 0; i < count; ++i) {
    out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

std::string shape_string(const Eigen::MatrixXd& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

}  // namespace drmpc
