#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string_view>

namespace drmpc {

/// H-representation {z : H z <= h}. A polytope with zero rows is the whole space.
struct Polytope {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;

  Polytope() = default;
  Polytope(Eigen::MatrixXd H_, Eigen::VectorXd h_) : H(std::move(H_)), h(std::move(h_)) {}

  Eigen::Index dim() const { return H.cols(); }
  Eigen::Index rows() const { return H.rows(); }
  bool is_whole_space() const { return H.rows() == 0; }

  static Polytope whole_space(Eigen::Index dim);
  /// {z : lower <= z <= upper}; infinite entries produce no row.
  static Polytope box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
  /// {z : |z_i| <= bound}.
  static Polytope symmetric_box(Eigen::Index dim, double bound);

  bool contains(const Eigen::VectorXd& z, double tol = 1e-9) const;

  /// Returns b if the set is exactly {|z_i| <= b_i} with every b_i > 0 (rows in any order,
  /// each coordinate bounded above and below by the same value).
  std::optional<Eigen::VectorXd> symmetric_box_bounds() const;

  /// Throws std::invalid_argument naming `what` on an all-zero row, non-finite h, or a wrong
  /// dimension when `expected_dim` >= 0.
  void validate(std::string_view what, Eigen::Index expected_dim = -1) const;
};

struct SupportResult {
  double value = 0.0;
  /// A maximizer of a'z over the set.
  Eigen::VectorXd argmax;
};

/// max_{z in P} a'z. Symmetric boxes use the closed form b'|a|; other sets solve an LP.
/// Throws std::domain_error if the set is unbounded in direction a and std::runtime_error if
/// it is empty.
SupportResult support(const Polytope& P, const Eigen::VectorXd& a);
double support_function(const Polytope& P, const Eigen::VectorXd& a);

/// True when the support function is finite along every +/- coordinate direction.
bool is_bounded(const Polytope& P);

/// True when the origin satisfies every row strictly with margin `margin`.
bool contains_origin_interior(const Polytope& P, double margin = 1e-9);

/// Removes rows implied by the others (one LP per row). Keeps the first of duplicate rows.
Polytope remove_redundant_rows(const Polytope& P, double tol = 1e-9);

/// Cartesian product P1 x P2.
Polytope cartesian_product(const Polytope& a, const Polytope& b);

}  // namespace drmpc
