#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace drmpc {

/// Relative tolerance used for PSD checks: eigenvalues must be >= -kTolPsd * max(1, lambda_max).
inline constexpr double kTolPsd = 1e-8;

/// Symmetric square root via eigendecomposition; eigenvalues below `clip` are set to zero.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& S, double clip = 0.0);

bool is_symmetric(const Eigen::MatrixXd& M, double tol = 1e-10);

/// Smallest eigenvalue of the symmetric part of M.
double min_eigenvalue(const Eigen::MatrixXd& M);
double max_eigenvalue(const Eigen::MatrixXd& M);

double spectral_radius(const Eigen::MatrixXd& A);

/// Throws std::invalid_argument naming `what` if M is not square, not symmetric,
/// or has an eigenvalue below -kTolPsd * max(1, lambda_max).
void require_psd(const Eigen::MatrixXd& M, std::string_view what);

/// Same as require_psd but demands a strictly positive smallest eigenvalue.
void require_pd(const Eigen::MatrixXd& M, std::string_view what);

Eigen::MatrixXd block_diag_repeat(const Eigen::MatrixXd& block, int count);

std::string shape_string(const Eigen::MatrixXd& M);

}  // namespace drmpc
