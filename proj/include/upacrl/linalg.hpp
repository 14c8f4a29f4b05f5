#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace upacrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Ridge-regression state over a set of samples:
///   cov = lambda * I + sum_i x_i x_i^T,   target = sum_i y_i x_i.
///
/// The inverse of `cov` is maintained incrementally with Sherman-Morrison
/// updates and recomputed from `cov` by a symmetric factorization every
/// `recondition_every` updates, or as soon as a residual probe along the
/// update direction exceeds `kResidualTolerance`.
///
/// Single writer. Const queries on a design that is not being mutated may run
/// concurrently.
class RegularizedDesign {
 public:
  static constexpr std::size_t kDefaultReconditionEvery = 256;
  static constexpr double kResidualTolerance = 1e-6;
  /// Slack on the ||x||_2 <= 1 precondition of rank_one_update.
  static constexpr double kNormSlack = 1e-9;
  /// Quadratic forms in [-kClampTolerance, 0) are treated as round-off.
  static constexpr double kClampTolerance = 1e-12;

  /// Throws std::invalid_argument unless dim >= 1 and lambda > 0.
  RegularizedDesign(int dim, double lambda,
                    std::size_t recondition_every = kDefaultReconditionEvery);

  /// cov += x x^T. Requires ||x||_2 <= 1 (+ kNormSlack).
  void rank_one_update(const VectorRef& x);
  /// target += y * x.
  void accumulate_target(const VectorRef& x, double y);
  /// target = 0; the covariance side is untouched.
  void reset_targets();
  /// Recomputes cov_inv from cov.
  void recondition();

  /// cov^{-1} * target.
  [[nodiscard]] Vector ridge_solve() const;
  /// sqrt(x^T cov^{-1} x).
  [[nodiscard]] double elliptical_norm(const VectorRef& x) const;
  /// sqrt(v^T cov v), the norm in which confidence ellipsoids are stated.
  [[nodiscard]] double design_norm(const VectorRef& v) const;
  /// max |cov * cov_inv - I|; O(d^3), meant for audits and tests.
  [[nodiscard]] double identity_residual() const;

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const Matrix& cov() const { return cov_; }
  [[nodiscard]] const Matrix& cov_inv() const { return cov_inv_; }
  [[nodiscard]] const Vector& target() const { return target_; }
  [[nodiscard]] std::size_t count() const { return count_; }
  [[nodiscard]] std::size_t updates_since_recondition() const { return updates_since_recondition_; }
  [[nodiscard]] std::size_t recondition_every() const { return recondition_every_; }

 private:
  void check_dim(const VectorRef& x) const;

  int dim_;
  double lambda_;
  std::size_t recondition_every_;
  Matrix cov_;
  Matrix cov_inv_;
  Vector target_;
  std::size_t count_ = 0;
  std::size_t updates_since_recondition_ = 0;
};

}  // namespace upacrl
